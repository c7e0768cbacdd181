//! Problem instances, feasibility geometry, and allocation bookkeeping.

use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::Mat;

/// Relative strictness threshold for the degradedness chain `K_i > K_{i+1}`.
pub const DEGRADED_STRICT_TOL: f64 = 1e-10;
/// Interiority pad for warm-start allocations; keeps log-det gradients
/// finite at initialization.
pub const WARM_START_PAD: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}x{expected}, got {got_rows}x{got_cols} for {what}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("stage count mismatch: {what} has {got} entries, expected {expected}")]
    StageCountMismatch {
        what: String,
        got: usize,
        expected: usize,
    },
    #[error("allocation increment {stage} is not PSD: min eigenvalue {min_eig:.3e}")]
    IncrementNotPsd { stage: usize, min_eig: f64 },
    #[error("weights must satisfy mu_1 >= ... >= mu_L >= 0 with mu_1 > 0, got {mu:?}")]
    BadWeights { mu: Vec<f64> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A vector Gaussian successive-refinement instance: source covariance
/// `K0`, degraded side-information noise covariances `K_1 > ... > K_L`,
/// and per-stage distortion targets `D_1..D_L`. Stage 1 has the worst side
/// information.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    p: usize,
    k0: Mat,
    k: Vec<Mat>,
    d: Vec<Mat>,
}

impl ProblemInstance {
    /// Build an instance, checking dimensional consistency only.
    /// Semantic invariants (positive definiteness, degradedness) are the
    /// business of [`validate_instance`].
    pub fn new(k0: Mat, k: Vec<Mat>, d: Vec<Mat>) -> Result<Self, ModelError> {
        let p = k0.nrows();
        let check = |m: &Mat, what: &str| -> Result<(), ModelError> {
            if m.nrows() != p || m.ncols() != p {
                return Err(ModelError::DimensionMismatch {
                    what: what.to_string(),
                    expected: p,
                    got_rows: m.nrows(),
                    got_cols: m.ncols(),
                });
            }
            Ok(())
        };
        check(&k0, "K0")?;
        if k.is_empty() {
            return Err(ModelError::StageCountMismatch {
                what: "K".into(),
                got: 0,
                expected: 1,
            });
        }
        if d.len() != k.len() {
            return Err(ModelError::StageCountMismatch {
                what: "D".into(),
                got: d.len(),
                expected: k.len(),
            });
        }
        for (i, m) in k.iter().enumerate() {
            check(m, &format!("K{}", i + 1))?;
        }
        for (i, m) in d.iter().enumerate() {
            check(m, &format!("D{}", i + 1))?;
        }
        Ok(Self { p, k0, k, d })
    }

    /// Scalar convenience constructor (p = 1).
    pub fn scalar(k0: f64, k: &[f64], d: &[f64]) -> Result<Self, ModelError> {
        let one = |v: f64| Mat::from_element(1, 1, v);
        Self::new(
            one(k0),
            k.iter().copied().map(one).collect(),
            d.iter().copied().map(one).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn stages(&self) -> usize {
        self.k.len()
    }

    pub fn k0(&self) -> &Mat {
        &self.k0
    }

    /// Noise covariance of stage `i` (1-based).
    pub fn k(&self, i: usize) -> &Mat {
        &self.k[i - 1]
    }

    /// Distortion target of stage `i` (1-based).
    pub fn d(&self, i: usize) -> &Mat {
        &self.d[i - 1]
    }

    pub fn k_all(&self) -> &[Mat] {
        &self.k
    }

    pub fn d_all(&self) -> &[Mat] {
        &self.d
    }
}

/// One line of a validation report: a named check, whether it passed, and
/// the measured margin (a min eigenvalue; negative means violated).
#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn spectral_scale(m: &Mat) -> f64 {
    linalg::eig_sym(m)
        .map(|d| d.max_eigenvalue().abs().max(d.min_eigenvalue().abs()))
        .unwrap_or(1.0)
}

/// Check the semantic invariants of an instance: `K0, K_i, D_i` positive
/// definite and the noise chain strictly degraded. Violations are reported
/// with their margins rather than raised.
pub fn validate_instance(inst: &ProblemInstance) -> Result<ValidationReport, ModelError> {
    let mut checks = Vec::new();
    let mut pd_check = |name: String, m: &Mat| -> Result<(), ModelError> {
        let margin = linalg::min_eig(m)?;
        checks.push(ValidationCheck {
            name,
            passed: margin > 1e-10,
            margin,
        });
        Ok(())
    };
    pd_check("K0 positive definite".into(), &inst.k0)?;
    for i in 1..=inst.stages() {
        pd_check(format!("K{i} positive definite"), inst.k(i))?;
    }
    for i in 1..=inst.stages() {
        pd_check(format!("D{i} positive definite"), inst.d(i))?;
    }
    for i in 1..inst.stages() {
        let diff = inst.k(i) - inst.k(i + 1);
        let margin = linalg::min_eig(&diff)?;
        let threshold = DEGRADED_STRICT_TOL * spectral_scale(inst.k(i));
        checks.push(ValidationCheck {
            name: format!("K{i} strictly dominates K{}", i + 1),
            passed: margin > threshold,
            margin,
        });
    }
    Ok(ValidationReport { checks })
}

/// Rate-region allocation: PSD increments `B_i`, their cumulative sums
/// `S_i`, and the derived `Delta_i = (K0^{-1} + S_i)^{-1}`.
#[derive(Debug, Clone)]
pub struct BAllocation {
    b: Vec<Mat>,
    s: Vec<Mat>,
    delta: Vec<Mat>,
}

impl BAllocation {
    /// Build from increments. Each `B_i` must be PSD within 1e-9.
    pub fn from_increments(inst: &ProblemInstance, b: Vec<Mat>) -> Result<Self, ModelError> {
        if b.len() != inst.stages() {
            return Err(ModelError::StageCountMismatch {
                what: "B".into(),
                got: b.len(),
                expected: inst.stages(),
            });
        }
        let p = inst.dim();
        for (i, m) in b.iter().enumerate() {
            if m.nrows() != p || m.ncols() != p {
                return Err(ModelError::DimensionMismatch {
                    what: format!("B{}", i + 1),
                    expected: p,
                    got_rows: m.nrows(),
                    got_cols: m.ncols(),
                });
            }
            let min = linalg::min_eig(m)?;
            if min < -1e-9 * (1.0 + spectral_scale(m)) {
                return Err(ModelError::IncrementNotPsd {
                    stage: i + 1,
                    min_eig: min,
                });
            }
        }
        let k0_inv = linalg::inv_pd(inst.k0())?;
        let mut s = Vec::with_capacity(b.len());
        let mut delta = Vec::with_capacity(b.len());
        let mut acc = Mat::zeros(p, p);
        for m in &b {
            acc += m;
            acc = (&acc + acc.transpose()) * 0.5;
            s.push(acc.clone());
            delta.push(linalg::inv_pd(&(&k0_inv + &acc))?);
        }
        Ok(Self { b, s, delta })
    }

    /// Build from cumulative sums, differencing and PSD-projecting each
    /// increment. Returns the allocation and the worst Frobenius projection
    /// error across stages.
    pub fn from_cumulative(
        inst: &ProblemInstance,
        s: Vec<Mat>,
    ) -> Result<(Self, f64), ModelError> {
        if s.len() != inst.stages() {
            return Err(ModelError::StageCountMismatch {
                what: "S".into(),
                got: s.len(),
                expected: inst.stages(),
            });
        }
        let p = inst.dim();
        let mut b = Vec::with_capacity(s.len());
        let mut prev = Mat::zeros(p, p);
        let mut worst = 0.0f64;
        for si in &s {
            let diff = si - &prev;
            let proj = linalg::psd_project(&diff)?;
            worst = worst.max(linalg::fro_norm(&(&proj - &diff)));
            b.push(proj);
            prev = si.clone();
        }
        let alloc = Self::from_increments(inst, b)?;
        Ok((alloc, worst))
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Increment of stage `i` (1-based).
    pub fn b(&self, i: usize) -> &Mat {
        &self.b[i - 1]
    }

    /// Cumulative sum `S_i = B_1 + ... + B_i` (1-based).
    pub fn s(&self, i: usize) -> &Mat {
        &self.s[i - 1]
    }

    /// `Delta_i = (K0^{-1} + S_i)^{-1}` (1-based).
    pub fn delta(&self, i: usize) -> &Mat {
        &self.delta[i - 1]
    }

    pub fn b_all(&self) -> &[Mat] {
        &self.b
    }

    pub fn s_all(&self) -> &[Mat] {
        &self.s
    }
}

/// Weighted-sum-rate weights `mu_1 >= ... >= mu_L >= 0`, `mu_1 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    mu: Vec<f64>,
}

impl WeightVector {
    pub fn new(mu: Vec<f64>) -> Result<Self, ModelError> {
        let ok = !mu.is_empty()
            && mu[0] > 0.0
            && mu.iter().all(|&m| m.is_finite() && m >= 0.0)
            && mu.windows(2).all(|w| w[0] >= w[1]);
        if !ok {
            return Err(ModelError::BadWeights { mu });
        }
        Ok(Self { mu })
    }

    pub fn uniform(l: usize) -> Self {
        Self { mu: vec![1.0; l] }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Weight of stage `i` (1-based); zero beyond stage L so the
    /// `mu_{L+1} = 0` convention reads naturally at call sites.
    pub fn mu(&self, i: usize) -> f64 {
        self.mu.get(i - 1).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }
}

/// Constraint thresholds `L_i = D_i^{-1} - K0^{-1} - K_i^{-1}` of the rate
/// region: the cumulative sum `S_i` must Loewner-dominate `L_i`. These may
/// be indefinite and are returned unprojected.
pub fn required_lower_bounds(inst: &ProblemInstance) -> Result<Vec<Mat>, ModelError> {
    let k0_inv = linalg::inv_pd(inst.k0())?;
    let mut out = Vec::with_capacity(inst.stages());
    for i in 1..=inst.stages() {
        let d_inv = linalg::inv_pd(inst.d(i))?;
        let k_inv = linalg::inv_pd(inst.k(i))?;
        out.push(&d_inv - &k0_inv - k_inv);
    }
    Ok(out)
}

/// Feasibility report: min eigenvalues of each `B_i` and of each slack
/// `S_i - L_i`.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub b_margins: Vec<f64>,
    pub s_margins: Vec<f64>,
}

/// True iff every `B_i >= -tol I` and every `S_i >= L_i - tol I`.
pub fn is_feasible(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    tol: f64,
) -> Result<FeasibilityReport, ModelError> {
    let bounds = required_lower_bounds(inst)?;
    let mut b_margins = Vec::with_capacity(inst.stages());
    let mut s_margins = Vec::with_capacity(inst.stages());
    for i in 1..=inst.stages() {
        b_margins.push(linalg::min_eig(alloc.b(i))?);
        s_margins.push(linalg::min_eig(&(alloc.s(i) - &bounds[i - 1]))?);
    }
    let feasible = b_margins.iter().chain(s_margins.iter()).all(|&m| m >= -tol);
    Ok(FeasibilityReport {
        feasible,
        b_margins,
        s_margins,
    })
}

/// Feasible warm start by the running-maximum construction:
/// `S_1 = proj_psd(L_1) + eps I`, then
/// `S_i = S_{i-1} + proj_psd(L_i - S_{i-1}) + eps I`.
///
/// Each step only adds PSD mass, so the chain `S_1 <= S_2 <= ...` and every
/// `S_i >= L_i` hold by construction.
pub fn initial_feasible_allocation(inst: &ProblemInstance) -> Result<BAllocation, ModelError> {
    let bounds = required_lower_bounds(inst)?;
    let p = inst.dim();
    let pad = Mat::identity(p, p) * WARM_START_PAD;
    let mut s = Vec::with_capacity(inst.stages());
    let mut prev = Mat::zeros(p, p);
    for lb in &bounds {
        let lift = linalg::psd_project(&(lb - &prev))?;
        let si = &prev + lift + &pad;
        s.push(si.clone());
        prev = si;
    }
    let (alloc, _) = BAllocation::from_cumulative(inst, s)?;
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_chain() -> ProblemInstance {
        ProblemInstance::scalar(1.0, &[2.0, 1.0], &[0.5, 0.2]).unwrap()
    }

    #[test]
    fn validate_passes_on_proper_chain() {
        let report = validate_instance(&scalar_chain()).unwrap();
        assert!(report.all_passed(), "{:?}", report.failures());
    }

    #[test]
    fn validate_catches_reversed_chain() {
        let inst = ProblemInstance::scalar(1.0, &[1.0, 2.0], &[0.5, 0.2]).unwrap();
        let report = validate_instance(&inst).unwrap();
        let fail = report
            .checks
            .iter()
            .find(|c| c.name.contains("dominates"))
            .unwrap();
        assert!(!fail.passed);
        assert_relative_eq!(fail.margin, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn validate_catches_equality_in_chain() {
        let inst = ProblemInstance::scalar(1.0, &[1.0, 1.0], &[0.5, 0.2]).unwrap();
        let report = validate_instance(&inst).unwrap();
        assert!(!report.all_passed());
    }

    #[test]
    fn lower_bounds_worked_values() {
        let inst = ProblemInstance::scalar(1.0, &[1.0], &[0.25]).unwrap();
        let lb = required_lower_bounds(&inst).unwrap();
        assert_relative_eq!(lb[0][(0, 0)], 2.0, max_relative = 1e-12);

        // D = (K0^{-1}+K^{-1})^{-1} makes the bound exactly zero.
        let inst = ProblemInstance::scalar(1.0, &[1.0], &[0.5]).unwrap();
        let lb = required_lower_bounds(&inst).unwrap();
        assert_relative_eq!(lb[0][(0, 0)], 0.0, epsilon = 1e-12);

        let inst = ProblemInstance::scalar(1.0, &[1.0], &[100.0]).unwrap();
        let lb = required_lower_bounds(&inst).unwrap();
        assert!(lb[0][(0, 0)] < 0.0);
    }

    #[test]
    fn feasibility_cases() {
        // Loose distortions: B = 0 is feasible.
        let inst = ProblemInstance::scalar(1.0, &[2.0, 1.0], &[2.0, 2.0]).unwrap();
        let zero = BAllocation::from_increments(&inst, vec![Mat::zeros(1, 1); 2]).unwrap();
        assert!(is_feasible(&inst, &zero, 1e-10).unwrap().feasible);

        // Tight distortions: B = 0 is not.
        let inst = scalar_chain();
        let zero = BAllocation::from_increments(&inst, vec![Mat::zeros(1, 1); 2]).unwrap();
        assert!(!is_feasible(&inst, &zero, 1e-10).unwrap().feasible);

        // Boundary point S = (2/3, 3) of the worked L=2 instance.
        let inst = ProblemInstance::scalar(1.0, &[3.0, 1.0], &[0.5, 0.2]).unwrap();
        let s = vec![
            Mat::from_element(1, 1, 2.0 / 3.0),
            Mat::from_element(1, 1, 3.0),
        ];
        let (alloc, perr) = BAllocation::from_cumulative(&inst, s).unwrap();
        assert!(perr <= 1e-15);
        let report = is_feasible(&inst, &alloc, 1e-10).unwrap();
        assert!(report.feasible);
        assert!(report.s_margins[0].abs() <= 1e-12);
        assert!(report.s_margins[1].abs() <= 1e-12);
    }

    #[test]
    fn warm_start_traces() {
        // Scalar bounds (2, 1): running max keeps monotonicity.
        let inst =
            ProblemInstance::scalar(1.0, &[2.0, 1.0], &[1.0 / 3.5, 1.0 / 3.0]).unwrap();
        let lb = required_lower_bounds(&inst).unwrap();
        assert_relative_eq!(lb[0][(0, 0)], 2.0, max_relative = 1e-12);
        assert_relative_eq!(lb[1][(0, 0)], 1.0, max_relative = 1e-12);
        let alloc = initial_feasible_allocation(&inst).unwrap();
        assert_relative_eq!(alloc.s(1)[(0, 0)], 2.0, epsilon = 1e-7);
        assert_relative_eq!(alloc.s(2)[(0, 0)], 2.0, epsilon = 1e-7);
        assert!(alloc.s(2)[(0, 0)] >= alloc.s(1)[(0, 0)]);

        // Scalar bounds (1, 3): both stages lift.
        let inst =
            ProblemInstance::scalar(1.0, &[2.0, 1.0], &[1.0 / (1.0 + 1.5), 1.0 / 5.0]).unwrap();
        let lb = required_lower_bounds(&inst).unwrap();
        assert_relative_eq!(lb[0][(0, 0)], 1.0, max_relative = 1e-10);
        assert_relative_eq!(lb[1][(0, 0)], 3.0, max_relative = 1e-10);
        let alloc = initial_feasible_allocation(&inst).unwrap();
        assert_relative_eq!(alloc.s(1)[(0, 0)], 1.0, epsilon = 1e-7);
        assert_relative_eq!(alloc.s(2)[(0, 0)], 3.0, epsilon = 1e-7);
    }

    #[test]
    fn warm_start_near_zero_when_bounds_slack() {
        let inst = ProblemInstance::scalar(1.0, &[2.0, 1.0], &[5.0, 4.0]).unwrap();
        let alloc = initial_feasible_allocation(&inst).unwrap();
        for i in 1..=2 {
            assert!(alloc.b(i)[(0, 0)] <= 2.0 * WARM_START_PAD);
        }
        assert!(is_feasible(&inst, &alloc, 1e-10).unwrap().feasible);
    }

    #[test]
    fn warm_start_always_feasible_on_random_instances() {
        for seed in 0..30 {
            let inst = crate::oracle::random_instance(seed, 1 + (seed as usize % 3), 1 + (seed as usize % 3));
            let alloc = initial_feasible_allocation(&inst).unwrap();
            let report = is_feasible(&inst, &alloc, 1e-10).unwrap();
            assert!(report.feasible, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn delta_consistency() {
        // Delta_i^{-1} - Delta_{i-1}^{-1} = B_i.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let p = rng.gen_range(1..=4);
            let inst = crate::oracle::random_instance(rng.gen(), p, 3);
            let alloc = crate::oracle::random_feasible_allocation(rng.gen(), &inst, 1.0).unwrap();
            for i in 1..=3 {
                let prev_inv = if i == 1 {
                    linalg::inv_pd(inst.k0()).unwrap()
                } else {
                    linalg::inv_pd(alloc.delta(i - 1)).unwrap()
                };
                let diff = linalg::inv_pd(alloc.delta(i)).unwrap() - prev_inv;
                let err = linalg::fro_norm(&(&diff - alloc.b(i)));
                assert!(err <= 1e-10 * (1.0 + linalg::fro_norm(alloc.b(i))), "{err:.3e}");
            }
        }
    }

    #[test]
    fn weight_vector_ordering() {
        assert!(WeightVector::new(vec![1.0, 0.5, 0.0]).is_ok());
        assert!(WeightVector::new(vec![1.0, 1.0]).is_ok());
        assert!(WeightVector::new(vec![0.5, 1.0]).is_err());
        assert!(WeightVector::new(vec![0.0]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        let w = WeightVector::new(vec![1.0, 0.25]).unwrap();
        assert_eq!(w.mu(1), 1.0);
        assert_eq!(w.mu(2), 0.25);
        assert_eq!(w.mu(3), 0.0);
    }
}
