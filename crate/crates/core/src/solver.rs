//! Weighted sum-rate solver with KKT certification.
//!
//! The program minimizes `sum_i mu_i R_i(S)` over cumulative variables
//! `S_1 <= ... <= S_L` with `S_i >= L_i` and `S_1 >= 0`. The objective is
//! separable and concave in each `S_i`, and its per-stage gradient is PSD,
//! so minimizers sit on the constraint faces. A projected-gradient descent
//! with Dykstra-style cyclic cone projections identifies the active faces;
//! a Newton root-finder on the face-restricted stationarity system then
//! drives the KKT residual to solver tolerance. A certified point is
//! globally optimal (the extremal inequality turns any KKT point into a
//! matching converse bound), so the result records certification status
//! rather than descent-based optimality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::model::{
    self, BAllocation, ModelError, ProblemInstance, WeightVector,
};
use crate::region::{self, RatePoint, RegionError};
use crate::{Mat, Vecf};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver did not converge: best max residual {max_residual:.3e}")]
    NotConverged {
        max_residual: f64,
        best: Box<SolveResult>,
    },
    #[error("no PSD face certificate within tolerance at stage {stage}: fit residual {fit_residual:.3e}, multiplier min eig {min_eig:.3e}")]
    CertificateInfeasible {
        stage: usize,
        fit_residual: f64,
        min_eig: f64,
    },
    #[error("weight grid row {index} invalid: {source}")]
    BadWeightRow { index: usize, source: ModelError },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

/// Lagrange multipliers certifying an allocation: `Psi_i` for the PSD
/// constraints `B_i >= 0` and `Lambda_i` for the distortion constraints.
#[derive(Debug, Clone)]
pub struct KktCertificate {
    pub psi: Vec<Mat>,
    pub lambda: Vec<Mat>,
    pub weights: WeightVector,
}

/// Named, normalized KKT residuals. All entries are nonnegative violation
/// magnitudes, normalized per stage by `1 + |G_i|_F`, so "certified" means
/// every entry is at most the solver tolerance.
#[derive(Debug, Clone)]
pub struct KktResiduals {
    entries: Vec<(String, f64)>,
}

impl KktResiduals {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol_kkt: f64,
    pub max_iters: usize,
    pub starts: usize,
    pub seed: u64,
    pub step_init: f64,
    pub backtrack: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-7,
            max_iters: 5000,
            starts: 4,
            seed: 0,
            step_init: 1.0,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub allocation: BAllocation,
    pub rates: RatePoint,
    pub certificate: KktCertificate,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn objective(&self) -> f64 {
        self.rates.objective.unwrap_or(f64::NAN)
    }
}

/// Precomputed per-instance matrices shared by the inner loops.
struct Workspace {
    k0_inv: Mat,
    k_inv: Vec<Mat>,
    bounds: Vec<Mat>,
    l: usize,
    p: usize,
}

impl Workspace {
    fn new(inst: &ProblemInstance) -> Result<Self, SolverError> {
        let k0_inv = linalg::inv_pd(inst.k0())?;
        let mut k_inv = Vec::with_capacity(inst.stages());
        for i in 1..=inst.stages() {
            k_inv.push(linalg::inv_pd(inst.k(i))?);
        }
        let bounds = model::required_lower_bounds(inst)?;
        Ok(Self {
            k0_inv,
            k_inv,
            bounds,
            l: inst.stages(),
            p: inst.dim(),
        })
    }

    /// `K0^{-1} + K_i^{-1} + S` (1-based stage).
    fn stage_mat(&self, i: usize, s: &Mat) -> Mat {
        &self.k0_inv + &self.k_inv[i - 1] + s
    }

    fn objective(&self, w: &WeightVector, s: &[Mat]) -> Result<f64, SolverError> {
        let mut total = 0.0;
        let zero = Mat::zeros(self.p, self.p);
        for i in 1..=self.l {
            let prev = if i == 1 { &zero } else { &s[i - 2] };
            let num = linalg::logdet_pd(&self.stage_mat(i, &s[i - 1]))?;
            let den = linalg::logdet_pd(&self.stage_mat(i, prev))?;
            total += 0.5 * w.mu(i) * (num - den);
        }
        Ok(total)
    }

    /// Per-stage objective gradients
    /// `G_i = (mu_i/2)(K0^{-1}+K_i^{-1}+S_i)^{-1}
    ///       - (mu_{i+1}/2)(K0^{-1}+K_{i+1}^{-1}+S_i)^{-1}`,
    /// with the second term absent at `i = L`.
    fn gradient(&self, w: &WeightVector, s: &[Mat]) -> Result<Vec<Mat>, SolverError> {
        let mut g = Vec::with_capacity(self.l);
        for i in 1..=self.l {
            let mut gi = linalg::inv_pd(&self.stage_mat(i, &s[i - 1]))? * (0.5 * w.mu(i));
            if i < self.l {
                gi -= linalg::inv_pd(&self.stage_mat(i + 1, &s[i - 1]))? * (0.5 * w.mu(i + 1));
            }
            g.push(gi);
        }
        Ok(g)
    }

    /// Worst constraint violation (a min eigenvalue, negated) of a
    /// cumulative chain.
    fn violation(&self, s: &[Mat]) -> Result<f64, SolverError> {
        let mut worst = 0.0f64;
        let zero = Mat::zeros(self.p, self.p);
        for i in 0..self.l {
            let prev = if i == 0 { &zero } else { &s[i - 1] };
            worst = worst.max(-linalg::min_eig(&(&s[i] - prev))?);
            worst = worst.max(-linalg::min_eig(&(&s[i] - &self.bounds[i]))?);
        }
        Ok(worst)
    }

    /// Increase-only sweep restoring exact feasibility: each stage is
    /// lifted above its predecessor and its lower bound. Lifting only adds
    /// PSD mass, so earlier constraints stay satisfied by transitivity.
    fn repair(&self, s: &mut [Mat]) -> Result<(), SolverError> {
        let zero = Mat::zeros(self.p, self.p);
        for i in 0..self.l {
            let prev = if i == 0 { zero.clone() } else { s[i - 1].clone() };
            s[i] = &prev + linalg::psd_project(&(&s[i] - &prev))?;
            s[i] = &self.bounds[i] + linalg::psd_project(&(&s[i] - &self.bounds[i]))?;
        }
        Ok(())
    }

    /// Dykstra's alternating projections onto the intersection of the
    /// chain cones `{S_i >= S_{i-1}}` and the shifted cones
    /// `{S_i >= L_i}`, followed by a repair sweep so the output is exactly
    /// feasible.
    fn project_feasible(&self, s: &mut Vec<Mat>) -> Result<(), SolverError> {
        let n_sets = 2 * self.l;
        let mut corrections = vec![Mat::zeros(self.p, self.p); n_sets];
        // The chain constraints couple pairs, so corrections live per set
        // on the stage they modify most recently; pair projections use a
        // two-slot correction.
        let mut pair_corrections = vec![(Mat::zeros(self.p, self.p), Mat::zeros(self.p, self.p)); self.l];
        for _cycle in 0..60 {
            for i in 0..self.l {
                // Chain set.
                if i == 0 {
                    let y = &s[0] + &corrections[0];
                    let x_new = linalg::psd_project(&y)?;
                    corrections[0] = y - &x_new;
                    s[0] = x_new;
                } else {
                    let (ca, cb) = pair_corrections[i].clone();
                    let ya = &s[i - 1] + ca;
                    let yb = &s[i] + cb;
                    let mean = (&ya + &yb) * 0.5;
                    let half_gap = linalg::psd_project(&(&yb - &ya))? * 0.5;
                    let xa = &mean - &half_gap;
                    let xb = &mean + &half_gap;
                    pair_corrections[i] = (ya - &xa, yb - &xb);
                    s[i - 1] = xa;
                    s[i] = xb;
                }
                // Lower-bound set.
                let slot = self.l + i;
                let y = &s[i] + &corrections[slot];
                let x_new = &self.bounds[i] + linalg::psd_project(&(&y - &self.bounds[i]))?;
                corrections[slot] = y - &x_new;
                s[i] = x_new;
            }
            if self.violation(s)? <= 1e-12 {
                break;
            }
        }
        self.repair(s)?;
        Ok(())
    }
}

/// Objective gradients with respect to the cumulative sums, on the public
/// allocation type.
pub fn gradient_s(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
) -> Result<Vec<Mat>, SolverError> {
    let ws = Workspace::new(inst)?;
    ws.gradient(w, alloc.s_all())
}

/// Converse-side evaluation of the weighted sum rate:
/// `-(mu_1/2) log|(2pie)^{-1}(K0^{-1}+K_1^{-1})|` plus the printed
/// telescoping sum. Equals [`region::pvg_objective`] identically — the
/// `2 pi e` factors and the `|K0^{-1}+K_i^{-1}|` terms cancel.
pub fn converse_bound_printed(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
) -> Result<f64, SolverError> {
    let p = inst.dim() as f64;
    let base = linalg::inv_pd(inst.k0())? + linalg::inv_pd(inst.k(1))?;
    let first = -0.5 * w.mu(1) * (linalg::logdet_pd(&base)? - p * crate::gauss_info::LN_2PI_E);
    Ok(first + region::printed_rhs_sum(inst, alloc, w)?)
}

/// Orthonormal eigenvectors spanning the (near-)null space of a symmetric
/// PSD matrix, detected at `tol * (1 + |M|_F)`.
fn null_space_basis(m: &Mat, tol: f64) -> Result<Mat, SolverError> {
    let dec = linalg::eig_sym(m)?;
    let threshold = tol * (1.0 + linalg::fro_norm(m));
    let cols: Vec<usize> = dec
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l.abs() < threshold)
        .map(|(k, _)| k)
        .collect();
    let p = m.nrows();
    let mut basis = Mat::zeros(p, cols.len());
    for (out, &k) in cols.iter().enumerate() {
        basis.set_column(out, &dec.eigenvectors.column(k));
    }
    Ok(basis)
}

/// Minimal-norm least squares via the spectral pseudo-inverse of the
/// normal equations.
fn least_squares(a: &Mat, b: &Vecf) -> Result<Vecf, SolverError> {
    if a.ncols() == 0 {
        return Ok(Vecf::zeros(0));
    }
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let dec = linalg::eig_sym(&ata)?;
    let cutoff = 1e-12 * dec.max_eigenvalue().abs().max(1e-300);
    let pinv = dec.map_eigenvalues(|l| if l > cutoff { 1.0 / l } else { 0.0 });
    Ok(pinv * atb)
}

fn vec_of(m: &Mat) -> Vecf {
    Vecf::from_vec(m.as_slice().to_vec())
}

/// Recover the multipliers of the stationarity system at a near-optimal
/// allocation.
///
/// Backward telescoping: `Psi_L + Lambda_L = G_L` and
/// `Psi_i = Psi_{i+1} + G_i - Lambda_i`. Complementary slackness is
/// enforced structurally — `Psi_i` is supported on the null space of
/// `B_i`, `Lambda_i` on the null space of the distortion slack — and
/// within those faces the split is solved by least squares. PSD-ness of
/// the result is checked, not assumed.
pub fn recover_multipliers(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    w: &WeightVector,
    tol_active: f64,
) -> Result<KktCertificate, SolverError> {
    let ws = Workspace::new(inst)?;
    let g = ws.gradient(w, alloc.s_all())?;
    let l = ws.l;
    let p = ws.p;
    let mut psi = vec![Mat::zeros(p, p); l];
    let mut lambda = vec![Mat::zeros(p, p); l];
    let mut psi_next = Mat::zeros(p, p);
    for i in (1..=l).rev() {
        let target = &g[i - 1] + &psi_next;
        let u_b = null_space_basis(alloc.b(i), tol_active)?;
        let slack = ws.stage_mat(i, alloc.s(i)) - linalg::inv_pd(inst.d(i))?;
        let u_s = null_space_basis(&slack, tol_active)?;
        let kb = u_b.ncols();
        let ks = u_s.ncols();
        // Columns: spanning matrices u_a u_b^T of each face.
        let mut design = Mat::zeros(p * p, kb * kb + ks * ks);
        let mut col = 0;
        for a in 0..kb {
            for b in 0..kb {
                let outer = u_b.column(a) * u_b.column(b).transpose();
                design.set_column(col, &vec_of(&outer));
                col += 1;
            }
        }
        for a in 0..ks {
            for b in 0..ks {
                let outer = u_s.column(a) * u_s.column(b).transpose();
                design.set_column(col, &vec_of(&outer));
                col += 1;
            }
        }
        let x = least_squares(&design, &vec_of(&target))?;
        let mut z = Mat::zeros(kb, kb);
        for a in 0..kb {
            for b in 0..kb {
                z[(a, b)] = x[a * kb + b];
            }
        }
        let mut v = Mat::zeros(ks, ks);
        for a in 0..ks {
            for b in 0..ks {
                v[(a, b)] = x[kb * kb + a * ks + b];
            }
        }
        let psi_i = {
            let raw = &u_b * z * u_b.transpose();
            (&raw + raw.transpose()) * 0.5
        };
        let lambda_i = {
            let raw = &u_s * v * u_s.transpose();
            (&raw + raw.transpose()) * 0.5
        };
        let fit = linalg::fro_norm(&(&psi_i + &lambda_i - &target))
            / (1.0 + linalg::fro_norm(&target));
        let min_eig = linalg::min_eig(&psi_i)?.min(linalg::min_eig(&lambda_i)?);
        let psd_tol = tol_active * (1.0 + linalg::fro_norm(&target));
        if fit > 1e-3 || min_eig < -psd_tol.max(1e-9) {
            return Err(SolverError::CertificateInfeasible {
                stage: i,
                fit_residual: fit,
                min_eig,
            });
        }
        // Clean roundoff-scale negative eigenvalues; the projection stays
        // inside the face span.
        let psi_i = linalg::psd_project(&psi_i)?;
        let lambda_i = linalg::psd_project(&lambda_i)?;
        psi_next = psi_i.clone();
        psi[i - 1] = psi_i;
        lambda[i - 1] = lambda_i;
    }
    Ok(KktCertificate {
        psi,
        lambda,
        weights: w.clone(),
    })
}

/// Normalized KKT residuals of a certificate at an allocation:
/// stationarity gaps, primal feasibility violations, dual PSD violations,
/// and complementary slackness norms, each divided by `1 + |G_i|_F`.
pub fn kkt_residuals(
    inst: &ProblemInstance,
    alloc: &BAllocation,
    cert: &KktCertificate,
) -> Result<KktResiduals, SolverError> {
    let ws = Workspace::new(inst)?;
    let w = &cert.weights;
    let g = ws.gradient(w, alloc.s_all())?;
    let l = ws.l;
    let p = ws.p;
    let mut entries = Vec::new();
    for i in 1..=l {
        let norm = 1.0 + linalg::fro_norm(&g[i - 1]);
        let psi_next = if i < l {
            cert.psi[i].clone()
        } else {
            Mat::zeros(p, p)
        };
        let stat = &g[i - 1] - (&cert.psi[i - 1] - psi_next + &cert.lambda[i - 1]);
        entries.push((
            format!("stage{i}/stationarity"),
            linalg::fro_norm(&stat) / norm,
        ));
        let viol = |v: f64| (-v).max(0.0) / norm;
        entries.push((
            format!("stage{i}/primal_b"),
            viol(linalg::min_eig(alloc.b(i))?),
        ));
        let slack = ws.stage_mat(i, alloc.s(i)) - linalg::inv_pd(inst.d(i))?;
        entries.push((
            format!("stage{i}/primal_distortion"),
            viol(linalg::min_eig(&(alloc.s(i) - &ws.bounds[i - 1]))?),
        ));
        entries.push((
            format!("stage{i}/dual_psi"),
            viol(linalg::min_eig(&cert.psi[i - 1])?),
        ));
        entries.push((
            format!("stage{i}/dual_lambda"),
            viol(linalg::min_eig(&cert.lambda[i - 1])?),
        ));
        entries.push((
            format!("stage{i}/cs_b_psi"),
            linalg::fro_norm(&(alloc.b(i) * &cert.psi[i - 1])) / norm,
        ));
        entries.push((
            format!("stage{i}/cs_distortion_lambda"),
            linalg::fro_norm(&(&slack * &cert.lambda[i - 1])) / norm,
        ));
    }
    Ok(KktResiduals { entries })
}

/// Orthonormal basis of the symmetric p x p matrices, as vectorized
/// matrices (Frobenius inner product).
fn symmetric_basis(p: usize) -> Vec<Mat> {
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    for a in 0..p {
        for b in a..p {
            let mut e = Mat::zeros(p, p);
            if a == b {
                e[(a, a)] = 1.0;
            } else {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                e[(a, b)] = s;
                e[(b, a)] = s;
            }
            out.push(e);
        }
    }
    out
}

/// Active-face data for the Newton polish: for every stage, the near-null
/// eigenvectors of `B_i` (chain face) and of the distortion slack.
struct ActiveFaces {
    chain: Vec<Mat>,
    distortion: Vec<Mat>,
}

fn detect_faces(
    ws: &Workspace,
    inst: &ProblemInstance,
    s: &[Mat],
    tol: f64,
) -> Result<ActiveFaces, SolverError> {
    let mut chain = Vec::with_capacity(ws.l);
    let mut distortion = Vec::with_capacity(ws.l);
    let zero = Mat::zeros(ws.p, ws.p);
    for i in 1..=ws.l {
        let prev = if i == 1 { &zero } else { &s[i - 2] };
        chain.push(null_space_basis(&(&s[i - 1] - prev), tol)?);
        let slack = ws.stage_mat(i, &s[i - 1]) - linalg::inv_pd(inst.d(i))?;
        distortion.push(null_space_basis(&slack, tol)?);
    }
    Ok(ActiveFaces { chain, distortion })
}

/// Newton root-finding on the face-restricted stationarity system.
///
/// The active faces define affine constraints (`(S_i - L_i) U = 0`,
/// `(S_i - S_{i-1}) U = 0`); the tangent space of those constraints is
/// extracted from the null space of the stacked constraint operator, and
/// the projected gradient along the tangent basis is driven to zero by a
/// damped Newton iteration with the analytic Hessian.
fn polish_on_faces(
    ws: &Workspace,
    inst: &ProblemInstance,
    w: &WeightVector,
    s0: &[Mat],
    tol_active: f64,
) -> Result<Option<(Vec<Mat>, usize)>, SolverError> {
    let faces = detect_faces(ws, inst, s0, tol_active)?;
    let l = ws.l;
    let p = ws.p;
    let sym = symmetric_basis(p);
    let q = sym.len();
    let nvar = l * q;

    // Constraint rows (with right-hand sides) over the stacked symmetric
    // coordinates. A rank-deficient PSD face `{X >= A, V^T (X-A) V = 0}`
    // is a smooth manifold whose tangent space only requires the active
    // block `V^T H V` to vanish; the cross directions rotate the active
    // eigenvectors and must stay free, otherwise the stationarity system
    // is over-pinned and the Newton step cannot reach the KKT point.
    let mut rows: Vec<Vecf> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..l {
        for (basis, couples_prev) in [(&faces.distortion[i], false), (&faces.chain[i], true)] {
            for a in 0..basis.ncols() {
                for b in a..basis.ncols() {
                    let u = basis.column(a);
                    let v = basis.column(b);
                    let mut row = Vecf::zeros(nvar);
                    for (m, e) in sym.iter().enumerate() {
                        let val = (u.transpose() * e * &v)[(0, 0)];
                        row[i * q + m] += val;
                        if couples_prev && i > 0 {
                            row[(i - 1) * q + m] -= val;
                        }
                    }
                    rows.push(row);
                    rhs.push(if couples_prev {
                        0.0
                    } else {
                        (u.transpose() * &ws.bounds[i] * &v)[(0, 0)]
                    });
                }
            }
        }
    }

    // Stacked symmetric coordinates of the current point.
    let mut y0 = Vecf::zeros(nvar);
    for i in 0..l {
        for (m, e) in sym.iter().enumerate() {
            y0[i * q + m] = (&s0[i] * e).trace();
        }
    }
    let (y_base, tangent): (Vecf, Vec<Vecf>) = if rows.is_empty() {
        let full = (0..nvar)
            .map(|k| {
                let mut v = Vecf::zeros(nvar);
                v[k] = 1.0;
                v
            })
            .collect();
        (y0, full)
    } else {
        let mut c = Mat::zeros(rows.len(), nvar);
        for (r, row) in rows.iter().enumerate() {
            c.set_row(r, &row.transpose());
        }
        let b = Vecf::from_vec(rhs);
        // Project the point onto the affine face set: it may sit a face
        // -detection tolerance away, and the Newton parameterization keeps
        // whatever offset the base point has.
        let gap = &c * &y0 - &b;
        let cct = &c * c.transpose();
        let dec = linalg::eig_sym(&cct)?;
        let cutoff = 1e-12 * dec.max_eigenvalue().abs().max(1e-300);
        let cct_pinv = dec.map_eigenvalues(|v| if v > cutoff { 1.0 / v } else { 0.0 });
        let y_base = &y0 - c.transpose() * (cct_pinv * gap);
        let ctc = c.transpose() * &c;
        let dec = linalg::eig_sym(&ctc)?;
        let cutoff = 1e-10 * dec.max_eigenvalue().abs().max(1e-300);
        let tangent = (0..nvar)
            .filter(|&k| dec.eigenvalues[k] <= cutoff)
            .map(|k| Vecf::from(dec.eigenvectors.column(k)))
            .collect();
        (y_base, tangent)
    };
    let base_s: Vec<Mat> = (0..l)
        .map(|i| {
            let mut si = Mat::zeros(p, p);
            for (m, e) in sym.iter().enumerate() {
                si += e * y_base[i * q + m];
            }
            si
        })
        .collect();
    if tangent.is_empty() {
        // Fully pinned: the projected face point is the candidate.
        let f_entry = ws.objective(w, s0)?;
        if ws.violation(&base_s)? > 1e-9
            || ws.objective(w, &base_s)? > f_entry + 1e-9 * (1.0 + f_entry.abs())
        {
            return Ok(None);
        }
        return Ok(Some((base_s, 0)));
    }

    let build_s = |x: &Vecf, base: &[Mat]| -> Vec<Mat> {
        let mut s = base.to_vec();
        for (t, dir) in tangent.iter().enumerate() {
            for i in 0..l {
                for m in 0..q {
                    let coeff = x[t] * dir[i * q + m];
                    if coeff != 0.0 {
                        s[i] += &sym[m] * coeff;
                    }
                }
            }
        }
        s
    };
    let residual_vec = |s: &[Mat]| -> Result<Vecf, SolverError> {
        let g = ws.gradient(w, s)?;
        let mut r = Vecf::zeros(tangent.len());
        for (t, dir) in tangent.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..l {
                for m in 0..q {
                    let coeff = dir[i * q + m];
                    if coeff != 0.0 {
                        acc += coeff * (&g[i] * &sym[m]).trace();
                    }
                }
            }
            r[t] = acc;
        }
        Ok(r)
    };

    let mut x = Vecf::zeros(tangent.len());
    let mut s = base_s.clone();
    let mut r = residual_vec(&s)?;
    // The objective ceiling keeps Newton honest: the face minimum we are
    // after does not lie uphill, while the spurious root at infinity
    // (gradients of the log-dets vanish as S grows) always does.
    let f_entry = ws.objective(w, s0)?;
    let f_ceiling = f_entry + 1e-9 * (1.0 + f_entry.abs());
    let mut newton_iters = 0;
    for _ in 0..25 {
        if r.norm() <= 1e-13 {
            break;
        }
        // Analytic Hessian restricted to the tangent basis:
        // dG_i[H] = -(mu_i/2) M_i^{-1} H M_i^{-1}
        //           + (mu_{i+1}/2) N_i^{-1} H N_i^{-1}.
        let mut m_inv = Vec::with_capacity(l);
        let mut n_inv = Vec::with_capacity(l);
        for i in 1..=l {
            m_inv.push(linalg::inv_pd(&ws.stage_mat(i, &s[i - 1]))?);
            if i < l {
                n_inv.push(Some(linalg::inv_pd(&ws.stage_mat(i + 1, &s[i - 1]))?));
            } else {
                n_inv.push(None);
            }
        }
        let dir_mats: Vec<Vec<Mat>> = tangent
            .iter()
            .map(|dir| {
                (0..l)
                    .map(|i| {
                        let mut h = Mat::zeros(p, p);
                        for m in 0..q {
                            let c = dir[i * q + m];
                            if c != 0.0 {
                                h += &sym[m] * c;
                            }
                        }
                        h
                    })
                    .collect()
            })
            .collect();
        let nt = tangent.len();
        let mut jac = Mat::zeros(nt, nt);
        for n in 0..nt {
            let mut dg: Vec<Mat> = Vec::with_capacity(l);
            for i in 0..l {
                let h = &dir_mats[n][i];
                let mut d = -(0.5 * w.mu(i + 1)) * (&m_inv[i] * h * &m_inv[i]);
                if let Some(ninv) = &n_inv[i] {
                    d += (0.5 * w.mu(i + 2)) * (ninv * h * ninv);
                }
                dg.push(d);
            }
            for m in 0..nt {
                let mut acc = 0.0;
                for i in 0..l {
                    acc += (&dir_mats[m][i] * &dg[i]).trace();
                }
                jac[(m, n)] = acc;
            }
        }
        let delta = least_squares(&jac, &(-&r))?;
        // Damped update.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let x_new = &x + &delta * scale;
            let s_new = build_s(&x_new, &base_s);
            let f_ok = ws
                .objective(w, &s_new)
                .map(|f| f <= f_ceiling)
                .unwrap_or(false);
            if f_ok {
                if let Ok(r_new) = residual_vec(&s_new) {
                    if r_new.norm() < r.norm() * (1.0 - 1e-4) || r_new.norm() <= 1e-13 {
                        x = x_new;
                        s = s_new;
                        r = r_new;
                        accepted = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        newton_iters += 1;
        if !accepted {
            break;
        }
    }
    // The block parameterization is first-order: cross moves dent the
    // active eigenvalues by O(step^2). Repair lifts the point back to
    // exact feasibility; a wild Newton exit fails the objective ceiling
    // because repair only moves uphill.
    ws.repair(&mut s)?;
    if ws.objective(w, &s)? > f_ceiling {
        return Ok(None);
    }
    Ok(Some((s, newton_iters)))
}

struct Certified {
    s: Vec<Mat>,
    cert: KktCertificate,
    residuals: KktResiduals,
    max_residual: f64,
    objective: f64,
}

fn try_certify(
    ws: &Workspace,
    inst: &ProblemInstance,
    w: &WeightVector,
    s: &[Mat],
    tol_active: f64,
) -> Result<Option<Certified>, SolverError> {
    let (alloc, _) = match BAllocation::from_cumulative(inst, s.to_vec()) {
        Ok(pair) => pair,
        Err(_) => return Ok(None),
    };
    let cert = match recover_multipliers(inst, &alloc, w, tol_active) {
        Ok(c) => c,
        Err(SolverError::CertificateInfeasible { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let residuals = kkt_residuals(inst, &alloc, &cert)?;
    let max_residual = residuals.max_residual();
    let objective = ws.objective(w, s)?;
    Ok(Some(Certified {
        s: s.to_vec(),
        cert,
        residuals,
        max_residual,
        objective,
    }))
}

/// One optimization run from a fixed starting point. Returns the best
/// certified snapshot (by max residual) and the iteration count.
fn optimize_single(
    ws: &Workspace,
    inst: &ProblemInstance,
    w: &WeightVector,
    opts: &SolveOptions,
    s0: Vec<Mat>,
) -> Result<(Option<Certified>, usize), SolverError> {
    let mut s = s0;
    ws.repair(&mut s)?;
    let mut fval = ws.objective(w, &s)?;
    let mut best: Option<Certified> = None;
    let mut iters = 0usize;
    let mut step = opts.step_init;
    let mut stagnant = 0usize;
    let mut next_polish = 0usize;

    let consider = |cand: Certified, best: &mut Option<Certified>| -> bool {
        let done = cand.max_residual <= opts.tol_kkt;
        let better = best
            .as_ref()
            .map(|b| cand.max_residual < b.max_residual)
            .unwrap_or(true);
        if better {
            *best = Some(cand);
        }
        done
    };

    loop {
        // Polish before certifying: the face Newton step lands exactly on
        // the active faces, so certification sees clean complementary
        // slackness instead of the warm start's interiority pad.
        if iters >= next_polish || stagnant >= 3 {
            next_polish = iters + 25;
            if let Some((s_pol, newton_iters)) = polish_on_faces(ws, inst, w, &s, opts.tol_kkt)? {
                iters += newton_iters;
                let f_pol = ws.objective(w, &s_pol)?;
                if let Some(cand) = try_certify(ws, inst, w, &s_pol, opts.tol_kkt)? {
                    let done = consider(cand, &mut best);
                    if done {
                        // Adopt so the reported allocation is the polished
                        // face point.
                        break;
                    }
                }
                // Adopt the polished point only if it does not move uphill.
                if f_pol <= fval + 1e-12 * (1.0 + fval.abs()) {
                    s = s_pol;
                    fval = f_pol;
                }
            }
            if stagnant >= 3 {
                break;
            }
        }
        if iters % 10 == 0 {
            if let Some(cand) = try_certify(ws, inst, w, &s, opts.tol_kkt)? {
                if consider(cand, &mut best) {
                    break;
                }
            }
        }
        if iters >= opts.max_iters {
            break;
        }
        // Projected-gradient step with backtracking.
        let g = ws.gradient(w, &s)?;
        let mut t = step;
        let mut moved = false;
        for _ in 0..45 {
            let mut cand: Vec<Mat> = s
                .iter()
                .zip(g.iter())
                .map(|(si, gi)| si - gi * t)
                .collect();
            ws.project_feasible(&mut cand)?;
            let fcand = ws.objective(w, &cand)?;
            let pred: f64 = s
                .iter()
                .zip(cand.iter())
                .zip(g.iter())
                .map(|((si, ci), gi)| (gi * (si - ci)).trace())
                .sum();
            if fcand <= fval - 1e-4 * pred.max(0.0) {
                let displacement: f64 = s
                    .iter()
                    .zip(cand.iter())
                    .map(|(a, b)| linalg::fro_norm(&(a - b)))
                    .sum();
                let progress = fval - fcand;
                s = cand;
                fval = fcand;
                moved = displacement > 1e-14 || progress > 1e-15 * (1.0 + fval.abs());
                step = (t * 2.0).min(1e4);
                break;
            }
            t *= opts.backtrack;
        }
        iters += 1;
        if moved {
            stagnant = 0;
        } else {
            stagnant += 1;
            step = opts.step_init;
        }
    }
    Ok((best, iters))
}

fn random_start(
    ws: &Workspace,
    inst: &ProblemInstance,
    rng: &mut ChaCha8Rng,
    spread: f64,
) -> Result<Vec<Mat>, SolverError> {
    let warm = model::initial_feasible_allocation(inst)?;
    let p = ws.p;
    let mut s: Vec<Mat> = warm.s_all().to_vec();
    let mut inflate = Mat::zeros(p, p);
    for si in s.iter_mut() {
        let a = Mat::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        inflate += &a * a.transpose() * (spread / p as f64);
        *si += &inflate;
    }
    Ok(s)
}

/// Solve the weighted sum-rate program. Runs `opts.starts` optimizations
/// (the warm start plus seeded random feasible inflations), certifies each
/// terminal point by multiplier recovery, and returns the best certified
/// solution. A converged result has every KKT residual at most
/// `opts.tol_kkt`; otherwise [`SolverError::NotConverged`] carries the best
/// iterate found.
pub fn solve_weighted(
    inst: &ProblemInstance,
    w: &WeightVector,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    let ws = Workspace::new(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<Certified> = None;
    let mut total_iters = 0usize;
    let starts = opts.starts.max(1);
    for start in 0..starts {
        let s0 = if start == 0 {
            model::initial_feasible_allocation(inst)?.s_all().to_vec()
        } else {
            random_start(&ws, inst, &mut rng, 0.5 * start as f64)?
        };
        let (cand, iters) = optimize_single(&ws, inst, w, opts, s0)?;
        total_iters += iters;
        if let Some(cand) = cand {
            let adopt = match &best {
                None => true,
                Some(b) => {
                    if (cand.max_residual <= opts.tol_kkt) == (b.max_residual <= opts.tol_kkt) {
                        // Same certification status: prefer lower objective,
                        // then lower residual.
                        cand.objective < b.objective - 1e-12
                            || (cand.objective <= b.objective + 1e-12
                                && cand.max_residual < b.max_residual)
                    } else {
                        cand.max_residual <= opts.tol_kkt
                    }
                }
            };
            if adopt {
                best = Some(cand);
            }
        }
    }
    let best = match best {
        Some(b) => b,
        None => {
            // Nothing certified at any tolerance: report the warm start
            // with a zero certificate so the residuals speak for
            // themselves.
            let alloc = model::initial_feasible_allocation(inst)?;
            let p = inst.dim();
            let cert = KktCertificate {
                psi: vec![Mat::zeros(p, p); inst.stages()],
                lambda: vec![Mat::zeros(p, p); inst.stages()],
                weights: w.clone(),
            };
            let residuals = kkt_residuals(inst, &alloc, &cert)?;
            let rates = region::rate_corner(inst, &alloc)?.with_objective(w);
            let result = SolveResult {
                allocation: alloc,
                rates,
                certificate: cert,
                residuals: residuals.clone(),
                iterations: total_iters,
                restarts: starts - 1,
                converged: false,
            };
            return Err(SolverError::NotConverged {
                max_residual: residuals.max_residual(),
                best: Box::new(result),
            });
        }
    };
    let (alloc, proj_err) = BAllocation::from_cumulative(inst, best.s.clone())?;
    if proj_err > 1e-9 {
        log::debug!("increment projection error {proj_err:.3e} when finalizing allocation");
    }
    let rates = region::rate_corner(inst, &alloc)?.with_objective(w);
    let converged = best.max_residual <= opts.tol_kkt;
    let result = SolveResult {
        allocation: alloc,
        rates,
        certificate: best.cert,
        residuals: best.residuals,
        iterations: total_iters,
        restarts: starts - 1,
        converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(SolverError::NotConverged {
            max_residual: result.residuals.max_residual(),
            best: Box::new(result),
        })
    }
}

/// One boundary-trace row: the weights and the (possibly non-converged)
/// solve outcome.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub weights: WeightVector,
    pub result: SolveResult,
}

/// Solve the program once per weight vector; rows come back in input
/// order. Individual non-convergence is flagged per row, never aborting
/// the sweep. `jobs > 1` distributes rows over threads; results are
/// identical to the sequential run because each solve is independent and
/// deterministic.
pub fn trace_region(
    inst: &ProblemInstance,
    grid: &[Vec<f64>],
    opts: &SolveOptions,
    jobs: usize,
) -> Result<Vec<TraceRow>, SolverError> {
    let mut weights = Vec::with_capacity(grid.len());
    for (index, mu) in grid.iter().enumerate() {
        let w = WeightVector::new(mu.clone())
            .map_err(|source| SolverError::BadWeightRow { index, source })?;
        if w.len() != inst.stages() {
            return Err(SolverError::BadWeightRow {
                index,
                source: ModelError::StageCountMismatch {
                    what: "mu".into(),
                    got: w.len(),
                    expected: inst.stages(),
                },
            });
        }
        weights.push(w);
    }
    let solve_row = |w: &WeightVector| -> TraceRow {
        let result = match solve_weighted(inst, w, opts) {
            Ok(r) => r,
            Err(SolverError::NotConverged { best, .. }) => *best,
            Err(e) => {
                log::error!("trace row failed: {e}");
                // Represent hard failures as a non-converged zero result.
                let alloc = model::initial_feasible_allocation(inst)
                    .expect("warm start exists for valid instances");
                let p = inst.dim();
                let cert = KktCertificate {
                    psi: vec![Mat::zeros(p, p); inst.stages()],
                    lambda: vec![Mat::zeros(p, p); inst.stages()],
                    weights: w.clone(),
                };
                let residuals = kkt_residuals(inst, &alloc, &cert)
                    .expect("residuals computable at warm start");
                let rates = region::rate_corner(inst, &alloc)
                    .expect("rates computable at warm start")
                    .with_objective(w);
                SolveResult {
                    allocation: alloc,
                    rates,
                    certificate: cert,
                    residuals,
                    iterations: 0,
                    restarts: 0,
                    converged: false,
                }
            }
        };
        TraceRow {
            weights: w.clone(),
            result,
        }
    };
    let jobs = jobs.max(1).min(weights.len().max(1));
    if jobs <= 1 {
        return Ok(weights.iter().map(solve_row).collect());
    }
    let mut rows: Vec<Option<TraceRow>> = (0..weights.len()).map(|_| None).collect();
    {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new(&mut rows);
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if idx >= weights.len() {
                        break;
                    }
                    let row = solve_row(&weights[idx]);
                    slots.lock().expect("trace slot lock")[idx] = Some(row);
                });
            }
        });
    }
    Ok(rows
        .into_iter()
        .map(|r| r.expect("every trace row computed"))
        .collect())
}
