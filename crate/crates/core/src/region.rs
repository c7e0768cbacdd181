//! Rate-region evaluation: the per-stage log-det rate bounds, the weighted
//! sum-rate objective, the Gaussian achievability construction with
//! mutual-information cross-checks, and the closed-form Gaussian value of
//! the extremal functional.

use thiserror::Error;

use crate::gauss_info::{GaussError, GaussianJoint};
use crate::linalg::{self, LinalgError};
use crate::model::{self, BAllocation, ModelError, ProblemInstance, WeightVector};
use crate::Mat;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error("auxiliary regularizer {0:.3e} outside [1e-12, 1e-6]")]
    BadRegularizer(f64),
    #[error("auxiliary spec has {got} stages, expected {expected}")]
    StageMismatch { got: usize, expected: usize },
}

/// A rate tuple: per-stage rates, their partial sums, and the weighted
/// objective when weights are attached. Rates are in nats per source
/// symbol.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub rates: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub objective: Option<f64>,
}

impl RatePoint {
    fn from_rates(rates: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(rates.len());
        let mut acc = 0.0;
        for r in &rates {
            acc += r;
            cumulative.push(acc);
        }
        Self {
            rates,
            cumulative,
            objective: None,
        }
    }

    pub fn with_objective(mut self, w: &WeightVector) -> Self {
        let obj = self
            .rates
            .iter()
            .enumerate()
            .map(|(i, r)| w.mu(i + 1) * r)
            .sum();
        self.objective = Some(obj);
        self
    }
}

/// Gaussian auxiliary realization `W_i = X + V_i-noise` with per-stage
/// noise covariances. The regularizer is the epsilon used to keep the
/// noise finite when an allocation increment is singular.
#[derive(Debug, Clone)]
pub struct AuxiliarySpec {
    pub v: Vec<Mat>,
    pub epsilon: f64,
}

fn k0_inv(inst: &ProblemInstance) -> Result<Mat, RegionError> {
    Ok(linalg::inv_pd(inst.k0())?)
}

/// `K0^{-1} + K_i^{-1} + S` for the given cumulative sum (or zero).
fn stage_matrix(inst: &ProblemInstance, i: usize, s: Option<&Mat>) -> Result<Mat, RegionError> {
    let mut m = k0_inv(inst)? + linalg::inv_pd(inst.k(i))?;
    if let Some(s) = s {
        m += s;
    }
    Ok(m)
}

/// Per-stage rates of the region boundary at a given allocation:
/// `R_1 = 1/2 log |K0^{-1}+K_1^{-1}+B_1| / |K0^{-1}+K_1^{-1}|` and for
/// `i >= 2` the increment
/// `1/2 log |K0^{-1}+K_i^{-1}+S_i| / |K0^{-1}+K_i^{-1}+S_{i-1}|`.
///
/// An infeasible allocation is evaluated anyway, with a logged warning.
pub fn rate_corner(inst: &ProblemInstance, alloc: &BAllocation) -> Result<RatePoint, RegionError> {
    if let Ok(report) = model::is_feasible(inst, alloc, 1e-9) {
        if !report.feasible {
            log::warn!("rate_corner evaluating an infeasible allocation");
        }
    }
    let mut rates = Vec::with_capacity(inst.stages());
    for i in 1..=inst.stages() {
        let prev = if i == 1 { None } else { Some(alloc.s(i - 1)) };
        let num = stage_matrix(inst, i, Some(alloc.s(i)))?;
        let den = stage_matrix(inst, i, prev)?;
        rates.push(0.5 * (linalg::logdet_pd(&num)? - linalg::logdet_pd(&den)?));
    }
    Ok(RatePoint::from_rates(rates))
}

/// Weighted sum-rate objective `sum_i mu_i R_i` — the same log-dets as
/// [`rate_corner`], so the two agree exactly.
pub fn pvg_objective(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
) -> Result<f64, RegionError> {
    let point = rate_corner(inst, alloc)?.with_objective(w);
    Ok(point.objective.expect("objective attached"))
}

/// Auxiliary noise covariances realizing the allocation:
/// `V_i = (B_i + eps I)^{-1}`, so that observing `W_i = X + V_i-noise`
/// adds precision `B_i + eps I` per stage.
pub fn aux_spec_from_alloc(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    epsilon: f64,
) -> Result<AuxiliarySpec, RegionError> {
    if !(1e-12..=1e-6).contains(&epsilon) {
        return Err(RegionError::BadRegularizer(epsilon));
    }
    let p = inst.dim();
    let mut v = Vec::with_capacity(inst.stages());
    for i in 1..=inst.stages() {
        let prec = alloc.b(i) + Mat::identity(p, p) * epsilon;
        v.push(linalg::inv_pd(&prec)?);
    }
    Ok(AuxiliarySpec { v, epsilon })
}

/// Stage names used by the canonical joints: `X`, noise increments
/// `M1..ML` (with `M_i = N_i - N_{i+1}` and `N_{L+1} = 0`), side
/// information `Y1..YL`, auxiliary noises `xi1..xiL`, and auxiliaries
/// `W1..WL`.
pub fn var(name: &str, i: usize) -> String {
    format!("{name}{i}")
}

/// Build the joint of `(X, Y_1..Y_L, W_1..W_L)` for a Gaussian auxiliary
/// spec. The `Y_i` are realized through independent noise increments so
/// the degraded Markov chain holds exactly by construction.
pub fn build_canonical_joint(
    inst: &ProblemInstance,
    aux: &AuxiliarySpec,
) -> Result<GaussianJoint, RegionError> {
    let l = inst.stages();
    if aux.v.len() != l {
        return Err(RegionError::StageMismatch {
            got: aux.v.len(),
            expected: l,
        });
    }
    let p = inst.dim();
    let ident = Mat::identity(p, p);
    let mut blocks: Vec<(String, Mat)> = vec![("X".into(), inst.k0().clone())];
    for i in 1..=l {
        let cov = if i < l {
            inst.k(i) - inst.k(i + 1)
        } else {
            inst.k(l).clone()
        };
        blocks.push((var("M", i), cov));
    }
    for (i, vi) in aux.v.iter().enumerate() {
        blocks.push((var("xi", i + 1), vi.clone()));
    }
    let refs: Vec<(&str, Mat)> = blocks.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    let base = GaussianJoint::independent(&refs)?;

    let mut rows: Vec<(String, Vec<(String, Mat)>)> = Vec::new();
    for i in 1..=l {
        // Y_i = X + sum_{j >= i} M_j.
        let mut terms = vec![("X".to_string(), ident.clone())];
        for j in i..=l {
            terms.push((var("M", j), ident.clone()));
        }
        rows.push((var("Y", i), terms));
        rows.push((
            var("W", i),
            vec![("X".to_string(), ident.clone()), (var("xi", i), ident.clone())],
        ));
    }
    let row_refs: Vec<(&str, Vec<(&str, Mat)>)> = rows
        .iter()
        .map(|(n, terms)| {
            (
                n.as_str(),
                terms
                    .iter()
                    .map(|(b, c)| (b.as_str(), c.clone()))
                    .collect(),
            )
        })
        .collect();
    Ok(base.extend(&row_refs)?)
}

fn w_prefix(l: usize) -> Vec<String> {
    (1..=l).map(|i| var("W", i)).collect()
}

/// Rates from the achievability construction, evaluated as the
/// mutual informations `I(X; W_1 | Y_1)` and
/// `I(X; W_i | W_1..W_{i-1}, Y_i)`. Must agree with [`rate_corner`] up to
/// the epsilon regularization of the auxiliary noises.
pub fn achievable_rates_via_mi(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    epsilon: f64,
) -> Result<RatePoint, RegionError> {
    let aux = aux_spec_from_alloc(inst, alloc, epsilon)?;
    let joint = build_canonical_joint(inst, &aux)?;
    let mut rates = Vec::with_capacity(inst.stages());
    for i in 1..=inst.stages() {
        let wi = var("W", i);
        let yi = var("Y", i);
        let prefix = w_prefix(i - 1);
        let mut given: Vec<&str> = prefix.iter().map(|s| s.as_str()).collect();
        given.push(yi.as_str());
        rates.push(joint.mutual_information(&["X"], &[wi.as_str()], &given)?);
    }
    Ok(RatePoint::from_rates(rates))
}

/// Per-stage distortion report for the canonical auxiliaries of an
/// allocation: the Frobenius residual between `cov(X | Y_i, W_1..i)` and
/// its closed form `(K0^{-1}+K_i^{-1}+S_i^eps)^{-1}`, and the Loewner
/// margin `min eig(D_i - cov(X | Y_i, W_1..i))`.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    pub formula_residuals: Vec<f64>,
    pub margins: Vec<f64>,
}

impl DistortionReport {
    pub fn worst_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Distortion margins `min eig(D_i - cov(X | Y_i, W_1..i))` for an
/// arbitrary Gaussian auxiliary spec.
pub fn aux_distortion_margins(
    inst: &ProblemInstance,
    aux: &AuxiliarySpec,
) -> Result<Vec<f64>, RegionError> {
    let joint = build_canonical_joint(inst, aux)?;
    let mut margins = Vec::with_capacity(inst.stages());
    for i in 1..=inst.stages() {
        let yi = var("Y", i);
        let prefix = w_prefix(i);
        let mut given: Vec<&str> = vec![yi.as_str()];
        given.extend(prefix.iter().map(|s| s.as_str()));
        let cond = joint.conditional_cov(&["X"], &given)?;
        margins.push(linalg::min_eig(&(inst.d(i) - cond))?);
    }
    Ok(margins)
}

/// Verify the canonical conditional-covariance formula and the distortion
/// constraints at an allocation.
pub fn distortion_check(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    epsilon: f64,
) -> Result<DistortionReport, RegionError> {
    let aux = aux_spec_from_alloc(inst, alloc, epsilon)?;
    let joint = build_canonical_joint(inst, &aux)?;
    let p = inst.dim();
    let mut formula_residuals = Vec::with_capacity(inst.stages());
    let mut margins = Vec::with_capacity(inst.stages());
    for i in 1..=inst.stages() {
        let yi = var("Y", i);
        let prefix = w_prefix(i);
        let mut given: Vec<&str> = vec![yi.as_str()];
        given.extend(prefix.iter().map(|s| s.as_str()));
        let cond = joint.conditional_cov(&["X"], &given)?;
        let s_eps = alloc.s(i) + Mat::identity(p, p) * (epsilon * i as f64);
        let formula = linalg::inv_pd(&stage_matrix(inst, i, Some(&s_eps))?)?;
        formula_residuals.push(linalg::fro_norm(&(&cond - formula)));
        margins.push(linalg::min_eig(&(inst.d(i) - cond))?);
    }
    Ok(DistortionReport {
        formula_residuals,
        margins,
    })
}

/// Closed-form Gaussian value of the extremal functional's left side at
/// the canonical auxiliaries of an allocation:
/// `sum_{i<L} 1/2 [mu_i log|Delta_i+K_i| - mu_{i+1} log|Delta_i+K_{i+1}|
///  - (mu_i-mu_{i+1}) log|Delta_i|]
///  + mu_L/2 [log|Delta_L+K_L| - log|Delta_L|]`.
///
/// The `2 pi e` factors cancel within each stage, which makes the value
/// invariant under joint rescaling of the instance.
pub fn gaussian_ei_lhs(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
) -> Result<f64, RegionError> {
    let l = inst.stages();
    let mut total = 0.0;
    for i in 1..l {
        let delta = alloc.delta(i);
        total += 0.5
            * (w.mu(i) * linalg::logdet_pd(&(delta + inst.k(i)))?
                - w.mu(i + 1) * linalg::logdet_pd(&(delta + inst.k(i + 1)))?
                - (w.mu(i) - w.mu(i + 1)) * linalg::logdet_pd(delta)?);
    }
    let delta_l = alloc.delta(l);
    total += 0.5
        * w.mu(l)
        * (linalg::logdet_pd(&(delta_l + inst.k(l)))? - linalg::logdet_pd(delta_l)?);
    Ok(total)
}

/// Shared telescoping sum
/// `sum_{i<L} [-mu_{i+1}/2 log|(2pie)^{-1}(K0^{-1}+K_{i+1}^{-1}+S_i)|
///  + mu_i/2 log|(2pie)^{-1}(K0^{-1}+K_i^{-1}+S_i)|]
///  + mu_L/2 log|(2pie)^{-1}(K0^{-1}+K_L^{-1}+S_L)|`.
pub(crate) fn printed_rhs_sum(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
) -> Result<f64, RegionError> {
    let l = inst.stages();
    let p = inst.dim() as f64;
    let ln2pie = crate::gauss_info::LN_2PI_E;
    let mut total = 0.0;
    for i in 1..l {
        let m_i = stage_matrix(inst, i, Some(alloc.s(i)))?;
        let n_i = stage_matrix(inst, i + 1, Some(alloc.s(i)))?;
        total += 0.5 * w.mu(i) * (linalg::logdet_pd(&m_i)? - p * ln2pie)
            - 0.5 * w.mu(i + 1) * (linalg::logdet_pd(&n_i)? - p * ln2pie);
    }
    let m_l = stage_matrix(inst, l, Some(alloc.s(l)))?;
    total += 0.5 * w.mu(l) * (linalg::logdet_pd(&m_l)? - p * ln2pie);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_info::LN_2PI_E;
    use crate::model::ProblemInstance;
    use approx::assert_relative_eq;

    fn scalar_alloc(inst: &ProblemInstance, b: &[f64]) -> BAllocation {
        let b = b.iter().map(|&v| Mat::from_element(1, 1, v)).collect();
        BAllocation::from_increments(inst, b).unwrap()
    }

    fn worked_l1() -> (ProblemInstance, BAllocation) {
        let inst = ProblemInstance::scalar(1.0, &[1.0], &[0.25]).unwrap();
        let alloc = scalar_alloc(&inst, &[2.0]);
        (inst, alloc)
    }

    fn worked_l2() -> (ProblemInstance, BAllocation) {
        let inst = ProblemInstance::scalar(1.0, &[3.0, 1.0], &[0.5, 0.2]).unwrap();
        let alloc = scalar_alloc(&inst, &[2.0 / 3.0, 3.0 - 2.0 / 3.0]);
        (inst, alloc)
    }

    #[test]
    fn rate_corner_zero_allocation() {
        let inst = ProblemInstance::scalar(1.0, &[2.0, 1.0], &[2.0, 2.0]).unwrap();
        let alloc = scalar_alloc(&inst, &[0.0, 0.0]);
        let point = rate_corner(&inst, &alloc).unwrap();
        for r in &point.rates {
            assert!(r.abs() <= 1e-14);
        }
    }

    #[test]
    fn rate_corner_worked_values() {
        let (inst, alloc) = worked_l1();
        let point = rate_corner(&inst, &alloc).unwrap();
        assert_relative_eq!(point.rates[0], 0.5 * 2.0f64.ln(), max_relative = 1e-12);

        let (inst, alloc) = worked_l2();
        let point = rate_corner(&inst, &alloc).unwrap();
        assert_relative_eq!(point.rates[0], 0.5 * 1.5f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(point.rates[1], 0.5 * 1.875f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(
            point.cumulative[1],
            0.5170368837652692,
            max_relative = 1e-12
        );
    }

    #[test]
    fn pvg_objective_matches_weighted_rates() {
        let (inst, alloc) = worked_l2();
        let w = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let obj = pvg_objective(&inst, &alloc, &w).unwrap();
        assert_relative_eq!(obj, 0.5 * 1.5f64.ln() + 0.5 * 1.875f64.ln(), max_relative = 1e-12);

        let w = WeightVector::new(vec![1.0, 0.25]).unwrap();
        let point = rate_corner(&inst, &alloc).unwrap();
        let dot = point.rates[0] + 0.25 * point.rates[1];
        assert_eq!(pvg_objective(&inst, &alloc, &w).unwrap(), dot);
    }

    #[test]
    fn aux_spec_values() {
        let (inst, alloc) = worked_l1();
        let aux = aux_spec_from_alloc(&inst, &alloc, 1e-12).unwrap();
        assert_relative_eq!(aux.v[0][(0, 0)], 0.5, max_relative = 1e-9);

        let inst = ProblemInstance::scalar(1.0, &[1.0], &[2.0]).unwrap();
        let alloc = scalar_alloc(&inst, &[0.0]);
        let aux = aux_spec_from_alloc(&inst, &alloc, 1e-8).unwrap();
        assert_relative_eq!(aux.v[0][(0, 0)], 1e8, max_relative = 1e-9);

        // Diagonal p=2 case: V = diag(1, 1e8) at eps = 1e-8.
        let k0 = Mat::identity(2, 2);
        let inst = ProblemInstance::new(k0.clone(), vec![k0.clone()], vec![k0.clone()]).unwrap();
        let b = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        let alloc = BAllocation::from_increments(&inst, vec![b]).unwrap();
        let aux = aux_spec_from_alloc(&inst, &alloc, 1e-8).unwrap();
        assert_relative_eq!(aux.v[0][(0, 0)], 1.0, max_relative = 1e-7);
        assert_relative_eq!(aux.v[0][(1, 1)], 1e8, max_relative = 1e-7);

        assert!(aux_spec_from_alloc(&inst, &alloc, 1e-3).is_err());
    }

    #[test]
    fn mi_rates_match_rate_corner() {
        let (inst, alloc) = worked_l1();
        let via_mi = achievable_rates_via_mi(&inst, &alloc, 1e-8).unwrap();
        assert_relative_eq!(via_mi.rates[0], 0.5 * 2.0f64.ln(), epsilon = 1e-6);

        let (inst, alloc) = worked_l2();
        let via_mi = achievable_rates_via_mi(&inst, &alloc, 1e-8).unwrap();
        let corner = rate_corner(&inst, &alloc).unwrap();
        for i in 0..2 {
            assert_relative_eq!(via_mi.cumulative[i], corner.cumulative[i], epsilon = 1e-6);
        }

        // Zero allocation: every mutual information vanishes (to epsilon).
        let inst = ProblemInstance::scalar(1.0, &[2.0, 1.0], &[2.0, 2.0]).unwrap();
        let alloc = scalar_alloc(&inst, &[0.0, 0.0]);
        let via_mi = achievable_rates_via_mi(&inst, &alloc, 1e-8).unwrap();
        for r in &via_mi.rates {
            assert!(r.abs() <= 1e-6);
        }
    }

    #[test]
    fn distortion_check_values() {
        let (inst, alloc) = worked_l1();
        let report = distortion_check(&inst, &alloc, 1e-8).unwrap();
        assert!(report.formula_residuals[0] <= 1e-9);
        // cov(X | Y, W) = 1/4 = D exactly: margin ~ 0.
        assert!(report.margins[0].abs() <= 1e-7);

        let inst = ProblemInstance::scalar(1.0, &[1.0], &[2.0]).unwrap();
        let alloc = scalar_alloc(&inst, &[0.0]);
        let report = distortion_check(&inst, &alloc, 1e-8).unwrap();
        assert!(report.margins[0] > 1.0);

        // Infeasible allocation: negative margin reported, no error.
        let inst = ProblemInstance::scalar(1.0, &[1.0], &[0.25]).unwrap();
        let alloc = scalar_alloc(&inst, &[0.5]);
        let report = distortion_check(&inst, &alloc, 1e-8).unwrap();
        assert!(report.margins[0] < -1e-3);
    }

    #[test]
    fn gaussian_ei_lhs_values() {
        let (inst, alloc) = worked_l1();
        let w = WeightVector::uniform(1);
        let v = gaussian_ei_lhs(&inst, &alloc, &w).unwrap();
        assert_relative_eq!(v, 2.0f64.ln(), max_relative = 1e-12);

        // B = 0 reduces to the Delta_i = K0 expression.
        let inst = ProblemInstance::scalar(1.0, &[3.0, 1.0], &[4.0, 4.0]).unwrap();
        let alloc = scalar_alloc(&inst, &[0.0, 0.0]);
        let w = WeightVector::new(vec![1.0, 0.5]).unwrap();
        let v = gaussian_ei_lhs(&inst, &alloc, &w).unwrap();
        let expect = 0.5 * (1.0 * 4.0f64.ln() - 0.5 * 2.0f64.ln() - 0.5 * 1.0f64.ln())
            + 0.5 * 0.5 * (2.0f64.ln() - 1.0f64.ln());
        assert_relative_eq!(v, expect, max_relative = 1e-12);
    }

    #[test]
    fn ei_lhs_matches_entropic_evaluation() {
        // Cross-module equality: the closed form equals the entropy
        // combination evaluated on the canonical auxiliary joint.
        let (inst, alloc) = worked_l2();
        let w = WeightVector::new(vec![1.0, 0.5]).unwrap();
        let closed = gaussian_ei_lhs(&inst, &alloc, &w).unwrap();
        let aux = aux_spec_from_alloc(&inst, &alloc, 1e-8).unwrap();
        let joint = build_canonical_joint(&inst, &aux).unwrap();
        let l = inst.stages();
        let mut entropic = 0.0;
        for i in 1..l {
            let w_names = w_prefix(i);
            let given: Vec<&str> = w_names.iter().map(|s| s.as_str()).collect();
            let yi = var("Y", i);
            let yi1 = var("Y", i + 1);
            entropic += w.mu(i) * joint.conditional_entropy(&[yi.as_str()], &given).unwrap()
                - w.mu(i + 1) * joint.conditional_entropy(&[yi1.as_str()], &given).unwrap()
                - (w.mu(i) - w.mu(i + 1))
                    * joint.conditional_entropy(&["X"], &given).unwrap();
        }
        let w_names = w_prefix(l);
        let given: Vec<&str> = w_names.iter().map(|s| s.as_str()).collect();
        let yl = var("Y", l);
        entropic += w.mu(l)
            * (joint.conditional_entropy(&[yl.as_str()], &given).unwrap()
                - joint.conditional_entropy(&["X"], &given).unwrap());
        assert_relative_eq!(closed, entropic, epsilon = 1e-6);
    }

    #[test]
    fn cross_module_identity_with_offset() {
        // pvg = mu_1 h(X|Y_1) + gaussian_ei_lhs - (mu_1/2) log|2pie K_1|.
        for (inst, alloc, mu) in [
            (worked_l1().0, worked_l1().1, vec![1.0]),
            (worked_l2().0, worked_l2().1, vec![1.0, 1.0]),
            (worked_l2().0, worked_l2().1, vec![1.0, 0.3]),
        ] {
            let w = WeightVector::new(mu).unwrap();
            let pvg = pvg_objective(&inst, &alloc, &w).unwrap();
            let lhs = gaussian_ei_lhs(&inst, &alloc, &w).unwrap();
            let cond = linalg::inv_pd(&stage_matrix(&inst, 1, None).unwrap()).unwrap();
            let p = inst.dim() as f64;
            let h_x_y1 = 0.5 * (linalg::logdet_pd(&cond).unwrap() + p * LN_2PI_E);
            let offset =
                0.5 * w.mu(1) * (linalg::logdet_pd(inst.k(1)).unwrap() + p * LN_2PI_E);
            assert_relative_eq!(pvg, w.mu(1) * h_x_y1 + lhs - offset, epsilon = 1e-9);
        }
    }

    #[test]
    fn scale_invariance() {
        let (inst, alloc) = worked_l2();
        let w = WeightVector::new(vec![1.0, 0.5]).unwrap();
        let base_rates = rate_corner(&inst, &alloc).unwrap();
        let base_lhs = gaussian_ei_lhs(&inst, &alloc, &w).unwrap();
        for a in [0.1f64, 1.0, 10.0] {
            let a2 = a * a;
            let scaled = ProblemInstance::scalar(a2, &[3.0 * a2, a2], &[0.5 * a2, 0.2 * a2])
                .unwrap();
            let b: Vec<Mat> = alloc.b_all().iter().map(|m| m / a2).collect();
            let alloc_s = BAllocation::from_increments(&scaled, b).unwrap();
            let rates = rate_corner(&scaled, &alloc_s).unwrap();
            for i in 0..2 {
                assert_relative_eq!(rates.rates[i], base_rates.rates[i], epsilon = 1e-9);
            }
            let lhs = gaussian_ei_lhs(&scaled, &alloc_s, &w).unwrap();
            assert_relative_eq!(lhs, base_lhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn rate_increments_nonnegative_on_feasible_points() {
        for seed in 0..20u64 {
            let inst = crate::oracle::random_instance(seed, 2, 3);
            let alloc = crate::oracle::random_feasible_allocation(seed + 1000, &inst, 0.7).unwrap();
            let point = rate_corner(&inst, &alloc).unwrap();
            for r in &point.rates {
                assert!(*r >= -1e-12, "negative stage increment {r:.3e}");
            }
        }
    }
}
