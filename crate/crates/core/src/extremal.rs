//! Monotone-path verification of the extremal inequality.
//!
//! The path interpolates the real ensemble `(X, Y_i, W_i)` with an
//! independent Gaussian ensemble built from the allocation's `Delta_i`
//! matrices, via the covariance-preserving transform
//! `Z_gamma = sqrt(1-gamma) Z + sqrt(gamma) Z^G` together with the
//! orthogonal companions `Y*_{i,gamma} = sqrt(gamma) Y_i - sqrt(1-gamma)
//! Y_i^G`. The path functional `g(gamma)` moves from the entropic left
//! side of the inequality at `gamma -> 0` to the closed-form Gaussian
//! value at `gamma -> 1`, and is non-increasing in between. This module
//! realizes the path inside a [`GaussianJoint`], evaluates `g`, checks the
//! derivative formulas against finite differences, and assembles the full
//! inequality verdict.

use thiserror::Error;

use crate::gauss_info::{GaussError, GaussianJoint};
use crate::linalg::{self, LinalgError};
use crate::model::{BAllocation, ModelError, ProblemInstance, WeightVector};
use crate::region::{self, AuxiliarySpec, RegionError};
use crate::solver::{self, KktCertificate, SolverError};
use crate::Mat;

#[derive(Debug, Error)]
pub enum ExtremalError {
    #[error("gamma {0} outside the open interval (0, 1)")]
    GammaOutOfRange(f64),
    #[error("finite-difference step {step:.3e} incompatible with gamma {gamma}")]
    BadStep { gamma: f64, step: f64 },
    #[error("auxiliary violates a distortion constraint: margins {margins:?}")]
    DistortionViolation { margins: Vec<f64> },
    #[error("grid must have at least {min} points, got {got}")]
    GridTooSmall { min: usize, got: usize },
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Solver(#[from] Box<SolverError>),
}

/// Margin below which an auxiliary is rejected as violating a distortion
/// constraint.
pub const DISTORTION_MARGIN_TOL: f64 = 1e-8;

/// Scale floor for relative derivative errors: a derivative smaller than
/// this is numerically zero at the finite-difference resolution (central
/// differences at step 1e-5 carry ~1e-10 of roundoff), so the gap is
/// measured against this scale instead.
pub const DERIVATIVE_SCALE_FLOOR: f64 = 1e-5;

/// The gamma-parameterized path ensemble realized as one labeled joint.
///
/// Variable names: real ensemble `X`, `M{i}` (noise increments), `Y{i}`,
/// `xi{i}`, `W{i}`; Gaussian ensemble `XG{i}`, `GM{i}` (its noise
/// increments), `NG{i}`, `YG{i}`, `YTG{i}`; interpolated variables
/// `Xg{i}`, `Yg{i}`, `YTg{i}`, `Ystar{i}`.
#[derive(Debug, Clone)]
pub struct PathJoint {
    pub gamma: f64,
    pub joint: GaussianJoint,
    stages: usize,
}

impl PathJoint {
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Conditioning set `W_1..W_i` as owned names.
    fn w_prefix(&self, i: usize) -> Vec<String> {
        (1..=i).map(|j| region::var("W", j)).collect()
    }

    /// `h(target | Ystar_i, W_1..i)` for a named path variable.
    pub fn cond_entropy(&self, target: &str, i: usize) -> Result<f64, ExtremalError> {
        let star = region::var("Ystar", i);
        let w_names = self.w_prefix(i);
        let mut given: Vec<&str> = vec![star.as_str()];
        given.extend(w_names.iter().map(|s| s.as_str()));
        Ok(self.joint.conditional_entropy(&[target], &given)?)
    }

    /// Joint conditional entropy `h(a, Ystar_i | W_1..i)`.
    pub fn bivariate_entropy(&self, a: &str, i: usize) -> Result<f64, ExtremalError> {
        let star = region::var("Ystar", i);
        let w_names = self.w_prefix(i);
        let given: Vec<&str> = w_names.iter().map(|s| s.as_str()).collect();
        Ok(self
            .joint
            .conditional_entropy(&[a, star.as_str()], &given)?)
    }

    /// Conditional Fisher information `J(a | Ystar_i, W_1..i)`, evaluated
    /// as the inverse conditional covariance of the jointly Gaussian path.
    pub fn fisher(&self, a: &str, i: usize) -> Result<Mat, ExtremalError> {
        let star = region::var("Ystar", i);
        let w_names = self.w_prefix(i);
        let mut given: Vec<&str> = vec![star.as_str()];
        given.extend(w_names.iter().map(|s| s.as_str()));
        Ok(self.joint.fisher_conditional(&[a], &given)?)
    }
}

/// Build the path ensemble at a fixed `gamma` in (0, 1).
///
/// Every variable is an explicit linear map over the independent base
/// blocks, so the exact independence structure of the construction (the
/// degraded chain, the auxiliary noises, the G-ensemble) holds by
/// construction rather than by numerical accident.
pub fn build_path_joint(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    aux: &AuxiliarySpec,
    gamma: f64,
) -> Result<PathJoint, ExtremalError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ExtremalError::GammaOutOfRange(gamma));
    }
    let l = inst.stages();
    let p = inst.dim();
    let ident = Mat::identity(p, p);
    let root_g = gamma.sqrt();
    let root_1mg = (1.0 - gamma).sqrt();

    // Independent base blocks.
    let mut blocks: Vec<(String, Mat)> = vec![("X".into(), inst.k0().clone())];
    for i in 1..=l {
        let cov = if i < l {
            inst.k(i) - inst.k(i + 1)
        } else {
            inst.k(l).clone()
        };
        blocks.push((region::var("M", i), cov.clone()));
        blocks.push((region::var("GM", i), cov));
    }
    for (i, v) in aux.v.iter().enumerate() {
        blocks.push((region::var("xi", i + 1), v.clone()));
    }
    blocks.push((region::var("XG", l), alloc.delta(l).clone()));
    for i in 2..=l {
        blocks.push((region::var("GW", i), alloc.delta(i - 1) - alloc.delta(i)));
    }
    let refs: Vec<(&str, Mat)> = blocks.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    let base = GaussianJoint::independent(&refs)?;

    // First layer: Y_i, W_i, X_i^G (i < L), N_i^G.
    let mut layer1: Vec<(String, Vec<(String, Mat)>)> = Vec::new();
    for i in 1..=l {
        let mut terms = vec![("X".to_string(), ident.clone())];
        for j in i..=l {
            terms.push((region::var("M", j), ident.clone()));
        }
        layer1.push((region::var("Y", i), terms));
        layer1.push((
            region::var("W", i),
            vec![
                ("X".to_string(), ident.clone()),
                (region::var("xi", i), ident.clone()),
            ],
        ));
        let mut ng_terms = Vec::new();
        for j in i..=l {
            ng_terms.push((region::var("GM", j), ident.clone()));
        }
        layer1.push((region::var("NG", i), ng_terms));
        if i < l {
            // X_i^G = X_L^G + sum_{j=i+1..L} GW_j.
            let mut xg_terms = vec![(region::var("XG", l), ident.clone())];
            for j in (i + 1)..=l {
                xg_terms.push((region::var("GW", j), ident.clone()));
            }
            layer1.push((region::var("XG", i), xg_terms));
        }
    }
    let layer1_refs: Vec<(&str, Vec<(&str, Mat)>)> = layer1
        .iter()
        .map(|(n, t)| {
            (
                n.as_str(),
                t.iter().map(|(b, c)| (b.as_str(), c.clone())).collect(),
            )
        })
        .collect();
    let joint = base.extend(&layer1_refs)?;

    // Second layer: Y_i^G and Ytilde_i^G.
    let mut layer2: Vec<(String, Vec<(String, Mat)>)> = Vec::new();
    for i in 1..=l {
        layer2.push((
            region::var("YG", i),
            vec![
                (region::var("XG", i), ident.clone()),
                (region::var("NG", i), ident.clone()),
            ],
        ));
    }
    for i in 2..=l {
        layer2.push((
            region::var("YTG", i),
            vec![
                (region::var("XG", i - 1), ident.clone()),
                (region::var("NG", i), ident.clone()),
            ],
        ));
    }
    // Ytilde_{L+1}^G = X_L^G (the stage-(L+1) noise is null).
    layer2.push((
        region::var("YTG", l + 1),
        vec![(region::var("XG", l), ident.clone())],
    ));
    let layer2_refs: Vec<(&str, Vec<(&str, Mat)>)> = layer2
        .iter()
        .map(|(n, t)| {
            (
                n.as_str(),
                t.iter().map(|(b, c)| (b.as_str(), c.clone())).collect(),
            )
        })
        .collect();
    let joint = joint.extend(&layer2_refs)?;

    // Third layer: the interpolated variables.
    let a = &ident * root_1mg;
    let b = &ident * root_g;
    let neg_a = &ident * -root_1mg;
    let mut layer3: Vec<(String, Vec<(String, Mat)>)> = Vec::new();
    for i in 1..=l {
        layer3.push((
            region::var("Xg", i),
            vec![
                ("X".to_string(), a.clone()),
                (region::var("XG", i), b.clone()),
            ],
        ));
        layer3.push((
            region::var("Yg", i),
            vec![
                (region::var("Y", i), a.clone()),
                (region::var("YG", i), b.clone()),
            ],
        ));
        layer3.push((
            region::var("Ystar", i),
            vec![
                (region::var("Y", i), b.clone()),
                (region::var("YG", i), neg_a.clone()),
            ],
        ));
    }
    for i in 2..=l {
        layer3.push((
            region::var("YTg", i),
            vec![
                (region::var("Y", i), a.clone()),
                (region::var("YTG", i), b.clone()),
            ],
        ));
    }
    // YTg_{L+1} = sqrt(1-gamma) X + sqrt(gamma) X_L^G = Xg_L.
    layer3.push((
        region::var("YTg", l + 1),
        vec![
            ("X".to_string(), a.clone()),
            (region::var("YTG", l + 1), b.clone()),
        ],
    ));
    let layer3_refs: Vec<(&str, Vec<(&str, Mat)>)> = layer3
        .iter()
        .map(|(n, t)| {
            (
                n.as_str(),
                t.iter().map(|(b, c)| (b.as_str(), c.clone())).collect(),
            )
        })
        .collect();
    let joint = joint.extend(&layer3_refs)?;

    Ok(PathJoint {
        gamma,
        joint,
        stages: l,
    })
}

/// The path functional
/// `g(gamma) = sum_{i<L} [mu_i h(Y_{i,g}|Y*_{i,g},W_1..i)
///   - mu_{i+1} h(Ytilde_{i+1,g}|Y*_{i,g},W_1..i)
///   - (mu_i-mu_{i+1}) h(X_{i,g}|Y*_{i,g},W_1..i)]
///   + mu_L [h(Y_{L,g}|Y*_{L,g},W_1..L) - h(X_{L,g}|Y*_{L,g},W_1..L)]`.
pub fn eval_g(path: &PathJoint, w: &WeightVector) -> Result<f64, ExtremalError> {
    let l = path.stages();
    let mut total = 0.0;
    for i in 1..l {
        total += w.mu(i) * path.cond_entropy(&region::var("Yg", i), i)?
            - w.mu(i + 1) * path.cond_entropy(&region::var("YTg", i + 1), i)?
            - (w.mu(i) - w.mu(i + 1)) * path.cond_entropy(&region::var("Xg", i), i)?;
    }
    total += w.mu(l)
        * (path.cond_entropy(&region::var("Yg", l), l)?
            - path.cond_entropy(&region::var("Xg", l), l)?);
    Ok(total)
}

/// Exact entropic left side of the extremal inequality for a Gaussian
/// auxiliary spec:
/// `sum_{i<L} [mu_i h(Y_i|W_1..i) - mu_{i+1} h(Y_{i+1}|W_1..i)
///   - (mu_i-mu_{i+1}) h(X|W_1..i)] + mu_L [h(Y_L|W_1..L) - h(X|W_1..L)]`.
///
/// The auxiliary must meet every covariance distortion constraint; a
/// violation is reported with the failing margins.
pub fn ei_lhs_entropic(
    inst: &ProblemInstance,
    aux: &AuxiliarySpec,
    w: &WeightVector,
) -> Result<f64, ExtremalError> {
    let margins = region::aux_distortion_margins(inst, aux)?;
    if margins.iter().any(|&m| m < -DISTORTION_MARGIN_TOL) {
        return Err(ExtremalError::DistortionViolation { margins });
    }
    let joint = region::build_canonical_joint(inst, aux)?;
    let l = inst.stages();
    let mut total = 0.0;
    for i in 1..=l {
        let w_names: Vec<String> = (1..=i).map(|j| region::var("W", j)).collect();
        let given: Vec<&str> = w_names.iter().map(|s| s.as_str()).collect();
        let yi = region::var("Y", i);
        if i < l {
            let yi1 = region::var("Y", i + 1);
            total += w.mu(i) * joint.conditional_entropy(&[yi.as_str()], &given)?
                - w.mu(i + 1) * joint.conditional_entropy(&[yi1.as_str()], &given)?
                - (w.mu(i) - w.mu(i + 1)) * joint.conditional_entropy(&["X"], &given)?;
        } else {
            total += w.mu(l)
                * (joint.conditional_entropy(&[yi.as_str()], &given)?
                    - joint.conditional_entropy(&["X"], &given)?);
        }
    }
    Ok(total)
}

/// Right side of the inequality as printed: the telescoping log-det sum
/// with explicit `(2 pi e)^{-1}` factors. Not scale-invariant.
pub fn ei_rhs_printed(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
) -> Result<f64, ExtremalError> {
    Ok(region::printed_rhs_sum(inst, alloc, w)?)
}

/// The endpoint value `g(1)` in closed form: at `gamma = 1` every
/// conditional entropy in the path functional decouples to the independent
/// G-ensemble, giving exactly the closed-form Gaussian value
/// [`region::gaussian_ei_lhs`]. This differs from [`ei_rhs_printed`] by
/// the constant `(mu_1/2) log|2 pi e K_1|`; both are reported and the
/// scale-invariant endpoint form is the one used for tightness verdicts.
pub fn ei_rhs_endpoint(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
) -> Result<f64, ExtremalError> {
    Ok(region::gaussian_ei_lhs(inst, alloc, w)?)
}

/// Monotonicity report for `g` on a gamma grid.
#[derive(Debug, Clone)]
pub struct MonotoneReport {
    pub gammas: Vec<f64>,
    pub values: Vec<f64>,
    /// Worst positive step `g(k+1) - g(k)` beyond the slack
    /// `1e-7 (1 + |g(k)|)`; zero when monotone within slack.
    pub worst_violation: f64,
    pub monotone: bool,
}

/// Evaluate `g` on `grid_size` points of `[1e-6, 1 - 1e-6]` and check that
/// consecutive differences stay within the monotonicity slack. Flat
/// segments are allowed.
pub fn check_g_monotone(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    aux: &AuxiliarySpec,
    w: &WeightVector,
    grid_size: usize,
) -> Result<MonotoneReport, ExtremalError> {
    if grid_size < 3 {
        return Err(ExtremalError::GridTooSmall {
            min: 3,
            got: grid_size,
        });
    }
    let margin = 1e-6;
    let mut gammas = Vec::with_capacity(grid_size);
    let mut values = Vec::with_capacity(grid_size);
    for k in 0..grid_size {
        let t = k as f64 / (grid_size - 1) as f64;
        let gamma = margin + (1.0 - 2.0 * margin) * t;
        let path = build_path_joint(inst, alloc, aux, gamma)?;
        gammas.push(gamma);
        values.push(eval_g(&path, w)?);
    }
    let mut worst = 0.0f64;
    for k in 0..grid_size - 1 {
        let slack = 1e-7 * (1.0 + values[k].abs());
        worst = worst.max(values[k + 1] - values[k] - slack);
    }
    Ok(MonotoneReport {
        gammas,
        values,
        worst_violation: worst.max(0.0),
        monotone: worst <= 0.0,
    })
}

/// One derivative comparison: the closed-form value, the central finite
/// difference, and their absolute/relative gap.
#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    pub stage: usize,
    pub formula: f64,
    pub finite_difference: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct DerivativeReport {
    pub checks: Vec<DerivativeCheck>,
    pub worst_rel_err: f64,
}

impl DerivativeReport {
    fn from_checks(checks: Vec<DerivativeCheck>) -> Self {
        let worst = checks.iter().map(|c| c.rel_err).fold(0.0, f64::max);
        Self {
            checks,
            worst_rel_err: worst,
        }
    }
}

fn validate_step(gamma: f64, step: f64) -> Result<(), ExtremalError> {
    if !(step > 0.0) || gamma <= 2.0 * step || gamma >= 1.0 - 2.0 * step {
        return Err(ExtremalError::BadStep { gamma, step });
    }
    Ok(())
}

/// Check the derivative of the bivariate entropy
/// `h(X_{i,g}, Y*_{i,g} | W_1..i)` against the Fisher-form closed
/// expression
/// `1/(2(1-g)) tr{(Delta_i^{-1}+K_i^{-1})^{-1}
///   (J(X_{i,g}|Y*_{i,g},W_1..i) - Delta_i^{-1})}`
/// for every stage.
pub fn derivative_x_check(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    aux: &AuxiliarySpec,
    _w: &WeightVector,
    gamma: f64,
    step: f64,
) -> Result<DerivativeReport, ExtremalError> {
    validate_step(gamma, step)?;
    let path = build_path_joint(inst, alloc, aux, gamma)?;
    let plus = build_path_joint(inst, alloc, aux, gamma + step)?;
    let minus = build_path_joint(inst, alloc, aux, gamma - step)?;
    let mut checks = Vec::new();
    for i in 1..=inst.stages() {
        let name = region::var("Xg", i);
        let fd = (plus.bivariate_entropy(&name, i)? - minus.bivariate_entropy(&name, i)?)
            / (2.0 * step);
        let delta_inv = linalg::inv_pd(alloc.delta(i))?;
        let weight = linalg::inv_pd(&(&delta_inv + linalg::inv_pd(inst.k(i))?))?;
        let j = path.fisher(&name, i)?;
        let formula = (&weight * (j - delta_inv)).trace() / (2.0 * (1.0 - gamma));
        let abs_err = (fd - formula).abs();
        let rel_err = abs_err / formula.abs().max(DERIVATIVE_SCALE_FLOOR);
        checks.push(DerivativeCheck {
            stage: i,
            formula,
            finite_difference: fd,
            abs_err,
            rel_err,
        });
    }
    Ok(DerivativeReport::from_checks(checks))
}

/// Check the derivative of `h(Ytilde_{i+1,g}, Y*_{i,g} | W_1..i)` against
/// the `K_{i+1}`-weighted Fisher form, for stages `i in [1:L-1]`.
pub fn derivative_y_check(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    aux: &AuxiliarySpec,
    _w: &WeightVector,
    gamma: f64,
    step: f64,
) -> Result<DerivativeReport, ExtremalError> {
    validate_step(gamma, step)?;
    let path = build_path_joint(inst, alloc, aux, gamma)?;
    let plus = build_path_joint(inst, alloc, aux, gamma + step)?;
    let minus = build_path_joint(inst, alloc, aux, gamma - step)?;
    let mut checks = Vec::new();
    for i in 1..inst.stages() {
        let name = region::var("YTg", i + 1);
        let fd = (plus.bivariate_entropy(&name, i)? - minus.bivariate_entropy(&name, i)?)
            / (2.0 * step);
        let delta_inv = linalg::inv_pd(alloc.delta(i))?;
        let ki_inv = linalg::inv_pd(inst.k(i))?;
        let ki1 = inst.k(i + 1);
        let ki1_inv = linalg::inv_pd(ki1)?;
        let m_i = linalg::inv_pd(&(&delta_inv + &ki_inv))?;
        let m_i1 = linalg::inv_pd(&(&delta_inv + &ki1_inv))?;
        let weight = &m_i - &m_i1;
        let j = path.fisher(&name, i)?;
        let inner = (&delta_inv + &ki1_inv) * ki1 * j * ki1 * (&delta_inv + &ki1_inv)
            - &delta_inv * (alloc.delta(i) + ki1) * &delta_inv;
        let formula = (&weight * inner).trace() / (2.0 * (1.0 - gamma));
        let abs_err = (fd - formula).abs();
        let rel_err = abs_err / formula.abs().max(DERIVATIVE_SCALE_FLOOR);
        checks.push(DerivativeCheck {
            stage: i,
            formula,
            finite_difference: fd,
            abs_err,
            rel_err,
        });
    }
    Ok(DerivativeReport::from_checks(checks))
}

/// Finite-difference magnitude of `d/dgamma h(Y_{i,g}, Y*_{i,g}|W_1..i)`,
/// which vanishes identically: the pair is an orthogonal rotation of
/// `(Y_i, Y_i^G)`, so the joint conditional entropy does not depend on
/// gamma. Returns the worst magnitude across stages.
pub fn invariance_check(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    aux: &AuxiliarySpec,
    gamma: f64,
    step: f64,
) -> Result<f64, ExtremalError> {
    validate_step(gamma, step)?;
    let plus = build_path_joint(inst, alloc, aux, gamma + step)?;
    let minus = build_path_joint(inst, alloc, aux, gamma - step)?;
    let mut worst = 0.0f64;
    for i in 1..=inst.stages() {
        let name = region::var("Yg", i);
        let fd = (plus.bivariate_entropy(&name, i)? - minus.bivariate_entropy(&name, i)?)
            / (2.0 * step);
        worst = worst.max(fd.abs());
    }
    Ok(worst)
}

/// Full extremal-inequality verdict at a certified allocation.
#[derive(Debug, Clone)]
pub struct EiVerdict {
    pub lhs: f64,
    pub rhs_printed: f64,
    pub rhs_endpoint: f64,
    /// `rhs_endpoint - rhs_printed`, which equals
    /// `(mu_1/2) log|2 pi e K_1|`.
    pub offset: f64,
    pub offset_expected: f64,
    pub margin_endpoint: f64,
    pub margin_printed: f64,
    pub cert_max_residual: f64,
    pub distortion_margins: Vec<f64>,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Evaluate both sides of the inequality for an auxiliary at a certified
/// allocation. The hypotheses are checked first (certificate residuals at
/// 1e-6, distortion margins); failures are reported in the verdict, not
/// raised. The pass verdict is on the scale-invariant endpoint margin
/// `lhs - rhs_endpoint >= -1e-7`.
pub fn ei_verify(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    cert: &KktCertificate,
    aux: &AuxiliarySpec,
    w: &WeightVector,
) -> Result<EiVerdict, ExtremalError> {
    let mut failures = Vec::new();
    let residuals = solver::kkt_residuals(inst, alloc, cert).map_err(Box::new)?;
    let cert_max_residual = residuals.max_residual();
    if cert_max_residual > 1e-6 {
        failures.push(format!(
            "certificate residual {cert_max_residual:.3e} exceeds 1e-6"
        ));
    }
    let distortion_margins = region::aux_distortion_margins(inst, aux)?;
    if distortion_margins
        .iter()
        .any(|&m| m < -DISTORTION_MARGIN_TOL)
    {
        failures.push(format!(
            "auxiliary violates distortion constraints: {distortion_margins:?}"
        ));
    }
    let lhs = match ei_lhs_entropic(inst, aux, w) {
        Ok(v) => v,
        Err(ExtremalError::DistortionViolation { .. }) => f64::NAN,
        Err(e) => return Err(e),
    };
    let rhs_printed = ei_rhs_printed(inst, alloc, w)?;
    let rhs_endpoint = ei_rhs_endpoint(inst, alloc, w)?;
    let offset = rhs_endpoint - rhs_printed;
    let p = inst.dim() as f64;
    let offset_expected =
        0.5 * w.mu(1) * (linalg::logdet_pd(inst.k(1))? + p * crate::gauss_info::LN_2PI_E);
    let margin_endpoint = lhs - rhs_endpoint;
    let margin_printed = lhs - rhs_printed;
    if !(margin_endpoint >= -1e-7) {
        failures.push(format!(
            "endpoint margin {margin_endpoint:.3e} below -1e-7"
        ));
    }
    let pass = failures.is_empty();
    Ok(EiVerdict {
        lhs,
        rhs_printed,
        rhs_endpoint,
        offset,
        offset_expected,
        margin_endpoint,
        margin_printed,
        cert_max_residual,
        distortion_margins,
        failures,
        pass,
    })
}
