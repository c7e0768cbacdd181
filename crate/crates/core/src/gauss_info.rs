//! Closed-form Gaussian information functionals over labeled joint
//! covariances, plus numerical checkers for the Fisher information / MMSE
//! identities used by the extremal machinery.
//!
//! All quantities are evaluated in Gaussian closed form: differential
//! entropy is `1/2 logdet(2 pi e Sigma)`, conditional covariance is a Schur
//! complement, and conditional Fisher information is the inverse of the
//! conditional covariance. The checkers therefore validate the identities
//! on Gaussian instances only; general-distribution statements are out of
//! numerical reach.

use rand::Rng;
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::Mat;

/// `ln(2 pi e)`.
pub const LN_2PI_E: f64 = 2.837877066409345;

/// Minimum relative finite-difference step for the de Bruijn checker;
/// below this, cancellation dominates.
pub const DE_BRUIJN_MIN_STEP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum GaussError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("coefficient for `{base}` in `{var}` has wrong shape: {rows}x{cols}, expected {out}x{dim}")]
    BadCoefficientShape {
        var: String,
        base: String,
        rows: usize,
        cols: usize,
        out: usize,
        dim: usize,
    },
    #[error("degenerate conditional for target `{target}`: {source}")]
    DegenerateConditional {
        target: String,
        source: LinalgError,
    },
    #[error("finite-difference step {step:.3e} below cancellation guard {min:.3e}")]
    StepTooSmall { step: f64, min: f64 },
    #[error("noise ordering violated: Sigma_1 < Sigma_2 required, margin {margin:.3e}")]
    NoiseOrdering { margin: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A zero-mean jointly Gaussian vector with named blocks.
#[derive(Debug, Clone)]
pub struct GaussianJoint {
    vars: Vec<(String, usize, usize)>, // (name, offset, dim)
    cov: Mat,
}

impl GaussianJoint {
    /// Joint of mutually independent blocks: block-diagonal covariance.
    pub fn independent(blocks: &[(&str, Mat)]) -> Result<Self, GaussError> {
        let total: usize = blocks.iter().map(|(_, c)| c.nrows()).sum();
        let mut cov = Mat::zeros(total, total);
        let mut vars = Vec::with_capacity(blocks.len());
        let mut off = 0;
        for (name, c) in blocks {
            if vars.iter().any(|(n, _, _)| n == name) {
                return Err(GaussError::DuplicateVariable(name.to_string()));
            }
            let d = c.nrows();
            cov.view_mut((off, off), (d, d)).copy_from(c);
            vars.push((name.to_string(), off, d));
            off += d;
        }
        Ok(Self { vars, cov })
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn cov(&self) -> &Mat {
        &self.cov
    }

    pub fn var_names(&self) -> Vec<&str> {
        self.vars.iter().map(|(n, _, _)| n.as_str()).collect()
    }

    fn lookup(&self, name: &str) -> Result<(usize, usize), GaussError> {
        self.vars
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|&(_, off, dim)| (off, dim))
            .ok_or_else(|| GaussError::UnknownVariable(name.to_string()))
    }

    /// Flat covariance indices of the named blocks, in argument order.
    pub fn indices(&self, names: &[&str]) -> Result<Vec<usize>, GaussError> {
        let mut out = Vec::new();
        for name in names {
            let (off, dim) = self.lookup(name)?;
            out.extend(off..off + dim);
        }
        Ok(out)
    }

    /// Extend the joint with new variables defined as linear maps of
    /// existing ones: `new = sum_j coeff_j * base_j`. Existing variables
    /// are retained; the new covariance is `T cov T^T` for the stacked map.
    pub fn extend(&self, rows: &[(&str, Vec<(&str, Mat)>)]) -> Result<Self, GaussError> {
        let n = self.dim();
        let mut new_dim = 0usize;
        // Validate shapes first so errors carry context.
        for (name, terms) in rows {
            if self.vars.iter().any(|(v, _, _)| v == name)
                || rows
                    .iter()
                    .filter(|(other, _)| other == name)
                    .count()
                    > 1
            {
                return Err(GaussError::DuplicateVariable(name.to_string()));
            }
            let out = terms
                .first()
                .map(|(_, c)| c.nrows())
                .unwrap_or(0);
            for (base, coeff) in terms {
                let (_, dim) = self.lookup(base)?;
                if coeff.ncols() != dim || coeff.nrows() != out {
                    return Err(GaussError::BadCoefficientShape {
                        var: name.to_string(),
                        base: base.to_string(),
                        rows: coeff.nrows(),
                        cols: coeff.ncols(),
                        out,
                        dim,
                    });
                }
            }
            new_dim += out;
        }
        let total = n + new_dim;
        // T maps the old vector to the extended one: identity on the old
        // coordinates, the given linear maps below.
        let mut t = Mat::zeros(total, n);
        t.view_mut((0, 0), (n, n)).copy_from(&Mat::identity(n, n));
        let mut vars = self.vars.clone();
        let mut off = n;
        for (name, terms) in rows {
            let out = terms.first().map(|(_, c)| c.nrows()).unwrap_or(0);
            for (base, coeff) in terms {
                let (boff, bdim) = self.lookup(base)?;
                let mut view = t.view_mut((off, boff), (out, bdim));
                view += coeff;
            }
            vars.push((name.to_string(), off, out));
            off += out;
        }
        let cov = &t * &self.cov * t.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { vars, cov })
    }

    /// Marginal covariance of the named blocks (concatenated in order).
    pub fn marginal_cov(&self, names: &[&str]) -> Result<Mat, GaussError> {
        let idx = self.indices(names)?;
        Ok(self.cov.select_rows(&idx).select_columns(&idx))
    }

    /// Cross-covariance between two named groups.
    pub fn cross_cov(&self, rows: &[&str], cols: &[&str]) -> Result<Mat, GaussError> {
        let ri = self.indices(rows)?;
        let ci = self.indices(cols)?;
        Ok(self.cov.select_rows(&ri).select_columns(&ci))
    }

    /// Differential entropy `1/2 logdet(2 pi e Sigma)` in nats.
    pub fn entropy(&self, names: &[&str]) -> Result<f64, GaussError> {
        let sigma = self.marginal_cov(names)?;
        let d = sigma.nrows() as f64;
        let logdet = linalg::logdet_pd(&sigma).map_err(|source| {
            GaussError::DegenerateConditional {
                target: names.join(","),
                source,
            }
        })?;
        Ok(0.5 * (logdet + d * LN_2PI_E))
    }

    /// Conditional covariance of `target` given `given` (Schur complement).
    pub fn conditional_cov(&self, target: &[&str], given: &[&str]) -> Result<Mat, GaussError> {
        let ti = self.indices(target)?;
        let gi = self.indices(given)?;
        Ok(linalg::schur_conditional(&self.cov, &ti, &gi)?)
    }

    /// Conditional differential entropy `h(target | given)` in nats.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64, GaussError> {
        let cond = self.conditional_cov(target, given)?;
        let d = cond.nrows() as f64;
        let logdet = linalg::logdet_pd(&cond).map_err(|source| {
            GaussError::DegenerateConditional {
                target: target.join(","),
                source,
            }
        })?;
        Ok(0.5 * (logdet + d * LN_2PI_E))
    }

    /// Mutual information `I(a; b | given) = h(a|given) - h(a|b,given)`.
    pub fn mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        given: &[&str],
    ) -> Result<f64, GaussError> {
        let h_a = self.conditional_entropy(a, given)?;
        let mut b_and_given: Vec<&str> = b.to_vec();
        b_and_given.extend_from_slice(given);
        let h_a_given_b = self.conditional_entropy(a, &b_and_given)?;
        Ok(h_a - h_a_given_b)
    }

    /// Conditional Fisher information; for jointly Gaussian variables this
    /// is the inverse of the conditional covariance.
    pub fn fisher_conditional(&self, target: &[&str], given: &[&str]) -> Result<Mat, GaussError> {
        let cond = self.conditional_cov(target, given)?;
        linalg::inv_pd(&cond).map_err(|source| GaussError::DegenerateConditional {
            target: target.join(","),
            source,
        })
    }
}

/// Observation model shared by several checkers: `X ~ N(0, K_X)` and an
/// optional side variable `U = A X + xi` with independent noise `xi ~
/// N(0, Q)`.
#[derive(Debug, Clone)]
pub struct ObservedGaussian {
    pub kx: Mat,
    pub u: Option<(Mat, Mat)>,
}

impl ObservedGaussian {
    pub fn random(rng: &mut impl Rng, p: usize, with_u: bool) -> Self {
        let kx = random_spd(rng, p);
        let u = with_u.then(|| {
            let a = Mat::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
            (a, random_spd(rng, p))
        });
        Self { kx, u }
    }

    /// Joint over `X` and (if present) `U`, extended with independent noise
    /// blocks given by `extra` and derived variables given by `derived`.
    fn build(
        &self,
        extra: &[(&str, Mat)],
        derived: &[(&str, Vec<(&str, Mat)>)],
    ) -> Result<GaussianJoint, GaussError> {
        let p = self.kx.nrows();
        let mut blocks: Vec<(&str, Mat)> = vec![("X", self.kx.clone())];
        if let Some((_, q)) = &self.u {
            blocks.push(("xi_u", q.clone()));
        }
        blocks.extend_from_slice(extra);
        let base = GaussianJoint::independent(&blocks)?;
        let mut rows: Vec<(&str, Vec<(&str, Mat)>)> = Vec::new();
        if let Some((a, _)) = &self.u {
            rows.push((
                "U",
                vec![("X", a.clone()), ("xi_u", Mat::identity(p, p))],
            ));
        }
        rows.extend_from_slice(derived);
        base.extend(&rows)
    }

    fn given(&self) -> Vec<&'static str> {
        if self.u.is_some() {
            vec!["U"]
        } else {
            vec![]
        }
    }
}

pub(crate) fn random_spd(rng: &mut impl Rng, p: usize) -> Mat {
    let a = Mat::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + Mat::identity(p, p) * rng.gen_range(0.2..1.0)
}

/// Report of the de Bruijn identity check: finite differences of
/// `h(X+N|U)` in the entries of the noise covariance against half the
/// conditional Fisher information.
#[derive(Debug, Clone)]
pub struct DeBruijnReport {
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
    pub step: f64,
}

/// Check `grad_Sigma h(X+N|U) = 1/2 J(X+N|U)` by central finite
/// differences, with `sigma` the noise covariance and `step_rel` the step
/// relative to the spectral norm of `sigma`.
///
/// Off-diagonal entries are perturbed as symmetric pairs (both `(i,j)` and
/// `(j,i)` move together) and the resulting difference quotient is halved,
/// matching the free-gradient convention of the identity.
pub fn check_de_bruijn(
    inst: &ObservedGaussian,
    sigma: &Mat,
    step_rel: f64,
) -> Result<DeBruijnReport, GaussError> {
    if step_rel < DE_BRUIJN_MIN_STEP {
        return Err(GaussError::StepTooSmall {
            step: step_rel,
            min: DE_BRUIJN_MIN_STEP,
        });
    }
    let p = sigma.nrows();
    let scale = linalg::eig_sym(sigma)?.max_eigenvalue().abs().max(1e-12);
    let step = step_rel * scale;
    let given = inst.given();
    let entropy_at = |s: &Mat| -> Result<f64, GaussError> {
        let ident = Mat::identity(p, p);
        let joint = inst.build(
            &[("N", s.clone())],
            &[("Z", vec![("X", ident.clone()), ("N", ident.clone())])],
        )?;
        joint.conditional_entropy(&["Z"], &given)
    };
    let ident = Mat::identity(p, p);
    let joint = inst.build(
        &[("N", sigma.clone())],
        &[("Z", vec![("X", ident.clone()), ("N", ident)])],
    )?;
    let half_j = joint.fisher_conditional(&["Z"], &given)? * 0.5;

    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for i in 0..p {
        for j in i..p {
            let mut pert = Mat::zeros(p, p);
            pert[(i, j)] = step;
            pert[(j, i)] = step;
            let hp = entropy_at(&(sigma + &pert))?;
            let hm = entropy_at(&(sigma - &pert))?;
            let quotient = (hp - hm) / (2.0 * step);
            let grad_est = if i == j { quotient } else { quotient / 2.0 };
            let target = half_j[(i, j)];
            let abs = (grad_est - target).abs();
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(abs / target.abs().max(1e-12));
        }
    }
    Ok(DeBruijnReport {
        max_abs_dev: max_abs,
        max_rel_dev: max_rel,
        step,
    })
}

/// Residual of the complementary identity
/// `J(X+N|U) + Sigma^{-1} cov(X|X+N,U) Sigma^{-1} = Sigma^{-1}`,
/// exact in Gaussian closed form.
pub fn check_complementary(inst: &ObservedGaussian, sigma: &Mat) -> Result<f64, GaussError> {
    let p = sigma.nrows();
    let ident = Mat::identity(p, p);
    let joint = inst.build(
        &[("N", sigma.clone())],
        &[("Z", vec![("X", ident.clone()), ("N", ident)])],
    )?;
    let given = inst.given();
    let j = joint.fisher_conditional(&["Z"], &given)?;
    let mut z_and_given: Vec<&str> = vec!["Z"];
    z_and_given.extend_from_slice(&given);
    let mmse = joint.conditional_cov(&["X"], &z_and_given)?;
    let sigma_inv = linalg::inv_pd(sigma)?;
    let lhs = &j + &sigma_inv * mmse * &sigma_inv;
    Ok(linalg::fro_norm(&(lhs - sigma_inv)))
}

/// `X` and `Y` conditionally independent given `U`:
/// `X = A_x U + xi_x`, `Y = A_y U + xi_y` with independent noises.
#[derive(Debug, Clone)]
pub struct CondIndepPair {
    pub u_cov: Mat,
    pub ax: Mat,
    pub qx: Mat,
    pub ay: Mat,
    pub qy: Mat,
}

impl CondIndepPair {
    pub fn random(rng: &mut impl Rng, p: usize) -> Self {
        let coeff = |rng: &mut dyn rand::RngCore| Mat::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        Self {
            u_cov: random_spd(rng, p),
            ax: coeff(rng),
            qx: random_spd(rng, p),
            ay: coeff(rng),
            qy: random_spd(rng, p),
        }
    }

    /// I.i.d. pair given `U` (equal maps and noise covariances).
    pub fn iid(rng: &mut impl Rng, p: usize) -> Self {
        let mut pair = Self::random(rng, p);
        pair.ay = pair.ax.clone();
        pair.qy = pair.qx.clone();
        pair
    }

    fn joint(&self) -> Result<GaussianJoint, GaussError> {
        let p = self.u_cov.nrows();
        let ident = Mat::identity(p, p);
        let base = GaussianJoint::independent(&[
            ("U", self.u_cov.clone()),
            ("xi_x", self.qx.clone()),
            ("xi_y", self.qy.clone()),
        ])?;
        base.extend(&[
            ("X", vec![("U", self.ax.clone()), ("xi_x", ident.clone())]),
            ("Y", vec![("U", self.ay.clone()), ("xi_y", ident.clone())]),
            (
                "XpY",
                vec![
                    ("U", &self.ax + &self.ay),
                    ("xi_x", ident.clone()),
                    ("xi_y", ident),
                ],
            ),
        ])
    }
}

/// Matrix Fisher information inequality: min eigenvalue of
/// `A J(X|U) A^T + B J(Y|U) B^T - (A+B) J(X+Y|U) (A+B)^T`
/// for conditionally independent `X, Y` given `U`.
pub fn check_fii(a: &Mat, b: &Mat, pair: &CondIndepPair) -> Result<f64, GaussError> {
    let joint = pair.joint()?;
    let jx = joint.fisher_conditional(&["X"], &["U"])?;
    let jy = joint.fisher_conditional(&["Y"], &["U"])?;
    let jsum = joint.fisher_conditional(&["XpY"], &["U"])?;
    let ab = a + b;
    let lhs = a * jx * a.transpose() + b * jy * b.transpose() - &ab * jsum * ab.transpose();
    Ok(linalg::min_eig(&lhs)?)
}

/// MMSE shift inequality (Cramer-Rao flavored): min eigenvalue of
/// `[cov(X|X+N1,U)^{-1} - Sigma_1^{-1}] - [cov(X|X+N2,U)^{-1} - Sigma_2^{-1}]`
/// for `0 < Sigma_1 < Sigma_2`.
pub fn check_mmse_shift(
    inst: &ObservedGaussian,
    sigma1: &Mat,
    sigma2: &Mat,
) -> Result<f64, GaussError> {
    let margin = linalg::min_eig(&(sigma2 - sigma1))?;
    if margin <= 0.0 {
        return Err(GaussError::NoiseOrdering { margin });
    }
    let p = sigma1.nrows();
    let ident = Mat::identity(p, p);
    let joint = inst.build(
        &[("N1", sigma1.clone()), ("N2", sigma2.clone())],
        &[
            ("Z1", vec![("X", ident.clone()), ("N1", ident.clone())]),
            ("Z2", vec![("X", ident.clone()), ("N2", ident)]),
        ],
    )?;
    let given = inst.given();
    let mut z1_given: Vec<&str> = vec!["Z1"];
    z1_given.extend_from_slice(&given);
    let mut z2_given: Vec<&str> = vec!["Z2"];
    z2_given.extend_from_slice(&given);
    let prec1 = linalg::inv_pd(&joint.conditional_cov(&["X"], &z1_given)?)?;
    let prec2 = linalg::inv_pd(&joint.conditional_cov(&["X"], &z2_given)?)?;
    let lhs = (prec1 - linalg::inv_pd(sigma1)?) - (prec2 - linalg::inv_pd(sigma2)?);
    Ok(linalg::min_eig(&lhs)?)
}

/// Markov chain `U -> V -> X`, built so the conditional independence
/// `U ⟂ X | V` holds exactly: `U = A_u V + xi_u`, `X = A_x V + xi_x`.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    pub v_cov: Mat,
    pub au: Mat,
    pub qu: Mat,
    pub ax: Mat,
    pub qx: Mat,
}

impl MarkovChain {
    pub fn random(rng: &mut impl Rng, p: usize) -> Self {
        let coeff = |rng: &mut dyn rand::RngCore| Mat::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        Self {
            v_cov: random_spd(rng, p),
            au: coeff(rng),
            qu: random_spd(rng, p),
            ax: coeff(rng),
            qx: random_spd(rng, p),
        }
    }

    /// Degenerate chain with `U = V`.
    pub fn identity_observation(rng: &mut impl Rng, p: usize) -> Self {
        let mut chain = Self::random(rng, p);
        chain.au = Mat::identity(p, p);
        chain.qu = Mat::zeros(p, p);
        chain
    }

    /// Chain with `U` independent of `(V, X)`.
    pub fn independent_observation(rng: &mut impl Rng, p: usize) -> Self {
        let mut chain = Self::random(rng, p);
        chain.au = Mat::zeros(p, p);
        chain
    }

    fn joint(&self) -> Result<GaussianJoint, GaussError> {
        let p = self.v_cov.nrows();
        let ident = Mat::identity(p, p);
        let base = GaussianJoint::independent(&[
            ("V", self.v_cov.clone()),
            ("xi_u", self.qu.clone()),
            ("xi_x", self.qx.clone()),
        ])?;
        base.extend(&[
            ("U", vec![("V", self.au.clone()), ("xi_u", ident.clone())]),
            ("X", vec![("V", self.ax.clone()), ("xi_x", ident)]),
        ])
    }
}

/// Data processing inequality for Fisher information along `U -> V -> X`:
/// min eigenvalue of `J(X|V) - J(X|U)`.
pub fn check_dpi_fisher(chain: &MarkovChain) -> Result<f64, GaussError> {
    let joint = chain.joint()?;
    let jv = joint.fisher_conditional(&["X"], &["V"])?;
    let ju = joint.fisher_conditional(&["X"], &["U"])?;
    Ok(linalg::min_eig(&(jv - ju))?)
}

/// Data processing inequality for MMSE along `U -> V -> X`:
/// min eigenvalue of `cov(X|U) - cov(X|V)`.
pub fn check_dpi_mmse(chain: &MarkovChain) -> Result<f64, GaussError> {
    let joint = chain.joint()?;
    let cu = joint.conditional_cov(&["X"], &["U"])?;
    let cv = joint.conditional_cov(&["X"], &["V"])?;
    Ok(linalg::min_eig(&(cu - cv))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn transform_basics() {
        // Z = X + N with unit-variance independent parts.
        let base = GaussianJoint::independent(&[("X", one(1.0)), ("N", one(1.0))]).unwrap();
        let joint = base
            .extend(&[("Z", vec![("X", one(1.0)), ("N", one(1.0))])])
            .unwrap();
        assert_relative_eq!(joint.marginal_cov(&["Z"]).unwrap()[(0, 0)], 2.0);
        assert_relative_eq!(joint.cross_cov(&["Z"], &["X"]).unwrap()[(0, 0)], 1.0);
        assert!(base.extend(&[("X", vec![])]).is_err());
        assert!(base
            .extend(&[("W", vec![("missing", one(1.0))])])
            .is_err());
    }

    #[test]
    fn covariance_preserving_mix() {
        // sqrt(1-g) X + sqrt(g) X' keeps the covariance for any g when X, X'
        // are independent with equal covariance.
        let q = 1.7;
        for gamma in [0.1, 0.5, 0.9] {
            let base =
                GaussianJoint::independent(&[("X", one(q)), ("Xg", one(q))]).unwrap();
            let g: f64 = gamma;
            let joint = base
                .extend(&[(
                    "Z",
                    vec![("X", one((1.0 - g).sqrt())), ("Xg", one(g.sqrt()))],
                )])
                .unwrap();
            assert_relative_eq!(
                joint.marginal_cov(&["Z"]).unwrap()[(0, 0)],
                q,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn doubling_pair_orthogonal_for_iid_blocks() {
        // (sqrt(1-g)A + sqrt(g)B, sqrt(g)A - sqrt(1-g)B) has zero
        // cross-covariance when A, B are i.i.d.
        let g: f64 = 0.37;
        let c = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.5 });
        let base = GaussianJoint::independent(&[("A", c.clone()), ("B", c)]).unwrap();
        let i2 = Mat::identity(2, 2);
        let joint = base
            .extend(&[
                (
                    "P",
                    vec![("A", &i2 * (1.0 - g).sqrt()), ("B", &i2 * g.sqrt())],
                ),
                (
                    "Q",
                    vec![("A", &i2 * g.sqrt()), ("B", &i2 * -(1.0 - g).sqrt())],
                ),
            ])
            .unwrap();
        let cross = joint.cross_cov(&["P"], &["Q"]).unwrap();
        assert!(linalg::fro_norm(&cross) <= 1e-12);
    }

    #[test]
    fn entropy_values() {
        let j = GaussianJoint::independent(&[("X", one(1.0))]).unwrap();
        assert_relative_eq!(j.entropy(&["X"]).unwrap(), 1.4189385332046727, max_relative = 1e-12);

        let j = GaussianJoint::independent(&[("X", Mat::identity(2, 2))]).unwrap();
        assert_relative_eq!(j.entropy(&["X"]).unwrap(), 2.8378770664093453, max_relative = 1e-12);

        let j = GaussianJoint::independent(&[("X", one(4.0))]).unwrap();
        assert_relative_eq!(
            j.entropy(&["X"]).unwrap(),
            0.5 * (8.0 * std::f64::consts::PI * std::f64::consts::E).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn conditional_entropy_values() {
        // Independent blocks: conditioning is a no-op.
        let j = GaussianJoint::independent(&[("X", one(1.0)), ("Y", one(3.0))]).unwrap();
        assert_relative_eq!(
            j.conditional_entropy(&["X"], &["Y"]).unwrap(),
            j.entropy(&["X"]).unwrap(),
            max_relative = 1e-12
        );

        // X ~ N(0,1), Y = X + N: h(X|Y) = 1/2 ln(2 pi e * 0.5).
        let base = GaussianJoint::independent(&[("X", one(1.0)), ("N", one(1.0))]).unwrap();
        let j = base
            .extend(&[("Y", vec![("X", one(1.0)), ("N", one(1.0))])])
            .unwrap();
        assert_relative_eq!(
            j.conditional_entropy(&["X"], &["Y"]).unwrap(),
            0.5 * (0.5f64.ln() + LN_2PI_E),
            max_relative = 1e-12
        );

        // h(X|X) is degenerate and must error.
        let base = GaussianJoint::independent(&[("X", one(1.0))]).unwrap();
        let j = base.extend(&[("Xcopy", vec![("X", one(1.0))])]).unwrap();
        assert!(matches!(
            j.conditional_entropy(&["X"], &["Xcopy"]),
            Err(GaussError::DegenerateConditional { .. })
        ));
    }

    #[test]
    fn mutual_information_values() {
        let j = GaussianJoint::independent(&[("A", one(1.0)), ("B", one(2.0))]).unwrap();
        assert!(j.mutual_information(&["A"], &["B"], &[]).unwrap().abs() <= 1e-12);

        // Worked L=1 optimum: I(X; W | Y) = 1/2 ln 2.
        let base = GaussianJoint::independent(&[
            ("X", one(1.0)),
            ("V", one(0.5)),
            ("N", one(1.0)),
        ])
        .unwrap();
        let j = base
            .extend(&[
                ("W", vec![("X", one(1.0)), ("V", one(1.0))]),
                ("Y", vec![("X", one(1.0)), ("N", one(1.0))]),
            ])
            .unwrap();
        assert_relative_eq!(
            j.mutual_information(&["X"], &["W"], &["Y"]).unwrap(),
            0.5 * 2.0f64.ln(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn mutual_information_symmetry_and_nonnegativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..25 {
            let n = rng.gen_range(2..=5);
            let sigma = random_spd(&mut rng, n + 2);
            let names: Vec<String> = (0..n + 2).map(|i| format!("v{i}")).collect();
            let blocks: Vec<(&str, Mat)> = names
                .iter()
                .map(|nm| (nm.as_str(), Mat::zeros(1, 1)))
                .collect();
            let mut joint = GaussianJoint::independent(&blocks).unwrap();
            joint.cov = sigma;
            let a = [names[0].as_str()];
            let b = [names[1].as_str()];
            let ab = joint.mutual_information(&a, &b, &[]).unwrap();
            let ba = joint.mutual_information(&b, &a, &[]).unwrap();
            assert!((ab - ba).abs() <= 1e-9, "symmetry {ab} vs {ba}");
            assert!(ab >= -1e-10);
        }
    }

    #[test]
    fn fisher_values() {
        let base = GaussianJoint::independent(&[("X", one(2.0))]).unwrap();
        assert_relative_eq!(
            base.fisher_conditional(&["X"], &[]).unwrap()[(0, 0)],
            0.5,
            max_relative = 1e-12
        );

        // fisher * conditional_cov = I on a p=2 example.
        let m = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 - i as f64 } else { 1.0 });
        let base = GaussianJoint::independent(&[("X", m)]).unwrap();
        let f = base.fisher_conditional(&["X"], &[]).unwrap();
        let expect = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => 2.0,
            _ => -1.0,
        });
        assert!(linalg::fro_norm(&(&f - &expect)) <= 1e-10);
    }

    #[test]
    fn fisher_times_cov_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let p = rng.gen_range(1..=4);
            let inst = ObservedGaussian::random(&mut rng, p, true);
            let sigma = random_spd(&mut rng, p);
            let ident = Mat::identity(p, p);
            let joint = inst
                .build(
                    &[("N", sigma)],
                    &[("Z", vec![("X", ident.clone()), ("N", ident)])],
                )
                .unwrap();
            let f = joint.fisher_conditional(&["Z"], &["U"]).unwrap();
            let c = joint.conditional_cov(&["Z"], &["U"]).unwrap();
            let resid = linalg::fro_norm(&(&f * &c - Mat::identity(p, p)));
            assert!(resid <= 1e-9, "residual {resid:.3e}");
        }
    }

    #[test]
    fn conditioning_never_increases_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let p = rng.gen_range(1..=3);
            let inst = ObservedGaussian::random(&mut rng, p, true);
            let sigma = random_spd(&mut rng, p);
            let ident = Mat::identity(p, p);
            let joint = inst
                .build(
                    &[("N", sigma)],
                    &[("Z", vec![("X", ident.clone()), ("N", ident)])],
                )
                .unwrap();
            let h = joint.entropy(&["X"]).unwrap();
            let h_u = joint.conditional_entropy(&["X"], &["U"]).unwrap();
            let h_uz = joint.conditional_entropy(&["X"], &["U", "Z"]).unwrap();
            assert!(h_u <= h + 1e-10);
            assert!(h_uz <= h_u + 1e-10);
        }
    }

    #[test]
    fn de_bruijn_scalar_analytic() {
        // X ~ N(0,1), Sigma = 1: dh/dSigma = 1/4 = J/2 with J = 1/2.
        let inst = ObservedGaussian {
            kx: one(1.0),
            u: None,
        };
        let report = check_de_bruijn(&inst, &one(1.0), 1e-5).unwrap();
        assert!(report.max_rel_dev <= 1e-6, "{report:?}");
    }

    #[test]
    fn de_bruijn_p2_with_off_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = ObservedGaussian::random(&mut rng, 2, true);
        let mut sigma = random_spd(&mut rng, 2);
        sigma[(0, 1)] = 0.3;
        sigma[(1, 0)] = 0.3;
        let report = check_de_bruijn(&inst, &sigma, 1e-5).unwrap();
        assert!(report.max_rel_dev <= 1e-4, "{report:?}");
    }

    #[test]
    fn de_bruijn_step_guard() {
        let inst = ObservedGaussian {
            kx: one(1.0),
            u: None,
        };
        assert!(matches!(
            check_de_bruijn(&inst, &one(1.0), 1e-8),
            Err(GaussError::StepTooSmall { .. })
        ));
    }

    #[test]
    fn complementary_scalar_hand_value() {
        // K_X = Sigma = 1, no U: J = 1/2, cov(X|X+N) = 1/2, and
        // 1/2 + 1 * 1/2 * 1 = 1 = Sigma^{-1}.
        let inst = ObservedGaussian {
            kx: one(1.0),
            u: None,
        };
        let resid = check_complementary(&inst, &one(1.0)).unwrap();
        assert!(resid <= 1e-12);
    }

    #[test]
    fn complementary_random_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..100 {
            let p = rng.gen_range(1..=4);
            let with_u = rng.gen_bool(0.7);
            let inst = ObservedGaussian::random(&mut rng, p, with_u);
            let sigma = random_spd(&mut rng, p);
            let resid = check_complementary(&inst, &sigma).unwrap();
            assert!(resid <= 1e-9, "residual {resid:.3e}");
        }
    }

    #[test]
    fn fii_equality_and_order_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        // A = B = I/2 on an i.i.d. pair: equality.
        let pair = CondIndepPair::iid(&mut rng, 2);
        let half = Mat::identity(2, 2) * 0.5;
        let min = check_fii(&half, &half, &pair).unwrap();
        assert!(min.abs() <= 1e-9, "equality case min eig {min:.3e}");

        // A = I, B = 0: J(X+Y|U) <= J(X|U).
        let pair = CondIndepPair::random(&mut rng, 2);
        let min = check_fii(&Mat::identity(2, 2), &Mat::zeros(2, 2), &pair).unwrap();
        assert!(min >= -1e-9);
    }

    #[test]
    fn fii_random_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let p = rng.gen_range(1..=4);
            let pair = CondIndepPair::random(&mut rng, p);
            let a = Mat::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
            let b = Mat::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
            let min = check_fii(&a, &b, &pair).unwrap();
            assert!(min >= -1e-9, "min eig {min:.3e}");
        }
    }

    #[test]
    fn mmse_shift_scalar_equality() {
        // K_X = 1, Sigma_1 = 1, Sigma_2 = 2, no U: both sides equal
        // K_X^{-1} = 1, so the difference vanishes.
        let inst = ObservedGaussian {
            kx: one(1.0),
            u: None,
        };
        let min = check_mmse_shift(&inst, &one(1.0), &one(2.0)).unwrap();
        assert!(min.abs() <= 1e-10, "min {min:.3e}");
    }

    #[test]
    fn mmse_shift_large_noise_limit_and_random() {
        let inst = ObservedGaussian {
            kx: one(1.0),
            u: None,
        };
        let min = check_mmse_shift(&inst, &one(1.0), &one(1e6)).unwrap();
        assert!(min >= -1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let p = rng.gen_range(1..=4);
            let with_u = rng.gen_bool(0.5);
            let inst = ObservedGaussian::random(&mut rng, p, with_u);
            let s1 = random_spd(&mut rng, p);
            let s2 = &s1 + random_spd(&mut rng, p);
            let min = check_mmse_shift(&inst, &s1, &s2).unwrap();
            assert!(min >= -1e-9, "min eig {min:.3e}");
        }

        // Ordering precondition enforced.
        assert!(matches!(
            check_mmse_shift(&inst, &one(2.0), &one(1.0)),
            Err(GaussError::NoiseOrdering { .. })
        ));
    }

    #[test]
    fn dpi_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);

        // U = V: both inequalities are equalities.
        let chain = MarkovChain::identity_observation(&mut rng, 2);
        assert!(check_dpi_fisher(&chain).unwrap().abs() <= 1e-8);
        assert!(check_dpi_mmse(&chain).unwrap().abs() <= 1e-8);

        // U independent of (V, X).
        let chain = MarkovChain::independent_observation(&mut rng, 2);
        assert!(check_dpi_fisher(&chain).unwrap() >= -1e-9);
        assert!(check_dpi_mmse(&chain).unwrap() >= -1e-9);

        // Noisy observation trials.
        for _ in 0..50 {
            let p = rng.gen_range(1..=4);
            let chain = MarkovChain::random(&mut rng, p);
            assert!(check_dpi_fisher(&chain).unwrap() >= -1e-9);
            assert!(check_dpi_mmse(&chain).unwrap() >= -1e-9);
        }
    }
}
