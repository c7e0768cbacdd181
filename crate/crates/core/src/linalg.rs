//! Deterministic symmetric-matrix primitives.
//!
//! Everything downstream (entropies, Fisher information, the solver's cone
//! projections) is built on the spectral decomposition of a real symmetric
//! matrix, so all determinants and inverses here go through the same
//! eigenvalue route rather than mixing factorizations.

use nalgebra::SymmetricEigen;
use thiserror::Error;

use crate::Mat;

/// Soft symmetry tolerance: inputs asymmetric beyond this are symmetrized
/// with a logged warning.
pub const SYM_WARN_TOL: f64 = 1e-9;
/// Hard symmetry tolerance: inputs asymmetric beyond this are rejected.
pub const SYM_HARD_TOL: f64 = 1e-6;
/// Relative eigenvalue cutoff for positive definiteness checks.
pub const PD_CUTOFF: f64 = 1e-12;
/// Relative eigenvalue cutoff when pseudo-inverting singular conditioning
/// blocks.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max asymmetry {asymmetry:.3e} exceeds {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("matrix is not positive definite: min eigenvalue {min_eig:.6e}")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("index sets overlap at index {index}")]
    OverlappingIndexSets { index: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

/// Spectral decomposition `M = V diag(eigenvalues) V^T` of a symmetric
/// matrix, eigenvalues ascending.
///
/// Determinism: for a fixed input the decomposition is bit-reproducible.
/// Ties are broken by a stable sort on the eigenvalues (equal eigenvalues
/// keep the order produced by the underlying tridiagonal QL iteration), and
/// each eigenvector's sign is fixed so that its entry of largest magnitude
/// (first such entry on magnitude ties) is positive.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` paired with `eigenvalues[k]`.
    pub eigenvectors: Mat,
}

impl SpectralDecomposition {
    /// Rebuild `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.eigenvalues.len();
        let lambda = Mat::from_diagonal(&crate::Vecf::from_vec(self.eigenvalues.clone()));
        let mut out = &self.eigenvectors * lambda * self.eigenvectors.transpose();
        // Roundoff in V Λ V^T can leave ~1e-17 asymmetry; keep the invariant.
        out = symmetrize_unchecked(&out);
        debug_assert_eq!(out.nrows(), n);
        out
    }

    /// Rebuild with eigenvalues mapped through `f`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> Mat {
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let lambda = Mat::from_diagonal(&crate::Vecf::from_vec(mapped));
        symmetrize_unchecked(&(&self.eigenvectors * lambda * self.eigenvectors.transpose()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

fn max_asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn symmetrize_unchecked(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Symmetrize a square matrix, returning `(M + M^T)/2` and the max
/// elementwise asymmetry of the input.
pub fn symmetrize(m: &Mat) -> Result<(Mat, f64), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let asym = max_asymmetry(m);
    Ok((symmetrize_unchecked(m), asym))
}

/// Accept a matrix as symmetric, warning above [`SYM_WARN_TOL`] and
/// rejecting above [`SYM_HARD_TOL`].
fn require_symmetric(m: &Mat) -> Result<Mat, LinalgError> {
    let (sym, asym) = symmetrize(m)?;
    if asym > SYM_HARD_TOL {
        return Err(LinalgError::NotSymmetric {
            asymmetry: asym,
            tol: SYM_HARD_TOL,
        });
    }
    if asym > SYM_WARN_TOL {
        log::warn!("symmetrizing input with asymmetry {asym:.3e}");
    }
    Ok(sym)
}

/// Spectral decomposition of a symmetric matrix, eigenvalues ascending.
pub fn eig_sym(m: &Mat) -> Result<SpectralDecomposition, LinalgError> {
    let sym = require_symmetric(m)?;
    let n = sym.nrows();
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(0, 0),
        });
    }
    let SymmetricEigen {
        eigenvalues,
        eigenvectors,
    } = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[a]
            .partial_cmp(&eigenvalues[b])
            .expect("symmetric eigenvalues are finite")
    });
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Mat::zeros(n, n);
    for (k, &idx) in order.iter().enumerate() {
        vals.push(eigenvalues[idx]);
        let col = eigenvectors.column(idx);
        // Sign convention: largest-magnitude entry positive.
        let mut pivot = 0;
        for r in 1..n {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vecs[(r, k)] = sign * col[r];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues: vals,
        eigenvectors: vecs,
    })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &Mat) -> Result<f64, LinalgError> {
    Ok(eig_sym(m)?.min_eigenvalue())
}

/// True iff the smallest eigenvalue of `m` is at least `-tol`.
pub fn is_psd(m: &Mat, tol: f64) -> Result<bool, LinalgError> {
    Ok(min_eig(m)? >= -tol)
}

/// Loewner comparison `A <= B`, tested as `is_psd(B - A, tol)`.
pub fn loewner_leq(a: &Mat, b: &Mat, tol: f64) -> Result<bool, LinalgError> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(LinalgError::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    is_psd(&(b - a), tol)
}

/// Nearest PSD matrix in Frobenius norm: eigenvalues clipped at zero.
pub fn psd_project(m: &Mat) -> Result<Mat, LinalgError> {
    let dec = eig_sym(m)?;
    if dec.min_eigenvalue() >= 0.0 {
        // Fixed point: return the symmetrized input untouched.
        return Ok(require_symmetric(m)?);
    }
    Ok(dec.map_eigenvalues(|l| l.max(0.0)))
}

/// Natural-log determinant of a symmetric positive definite matrix,
/// computed as the sum of log eigenvalues.
pub fn logdet_pd(m: &Mat) -> Result<f64, LinalgError> {
    let dec = eig_sym(m)?;
    let scale = dec.max_eigenvalue().abs().max(dec.min_eigenvalue().abs());
    let min = dec.min_eigenvalue();
    if min <= PD_CUTOFF * scale.max(1e-300) {
        return Err(LinalgError::NotPositiveDefinite { min_eig: min });
    }
    Ok(dec.eigenvalues.iter().map(|l| l.ln()).sum())
}

/// Inverse of a symmetric positive definite matrix via the spectral route.
pub fn inv_pd(m: &Mat) -> Result<Mat, LinalgError> {
    let dec = eig_sym(m)?;
    let scale = dec.max_eigenvalue().abs().max(dec.min_eigenvalue().abs());
    let min = dec.min_eigenvalue();
    if min <= PD_CUTOFF * scale.max(1e-300) {
        return Err(LinalgError::NotPositiveDefinite { min_eig: min });
    }
    Ok(dec.map_eigenvalues(|l| 1.0 / l))
}

/// Spectral pseudo-inverse of a symmetric PSD matrix: eigenvalues below
/// `PINV_CUTOFF * lambda_max` are treated as exactly zero.
pub fn sym_pinv(m: &Mat) -> Result<Mat, LinalgError> {
    let dec = eig_sym(m)?;
    let cutoff = PINV_CUTOFF * dec.max_eigenvalue().abs().max(1e-300);
    Ok(dec.map_eigenvalues(|l| if l > cutoff { 1.0 / l } else { 0.0 }))
}

/// Conditional (Schur-complement) block of a joint PSD matrix:
/// `Sigma_AA - Sigma_AB Sigma_BB^{-1} Sigma_BA`.
///
/// When `Sigma_BB` is singular the spectral pseudo-inverse with the
/// [`PINV_CUTOFF`] relative eigenvalue cutoff is used, which is the
/// conditional covariance of the degenerate Gaussian. Returns `Sigma_AA`
/// when `idx_b` is empty.
pub fn schur_conditional(
    sigma: &Mat,
    idx_a: &[usize],
    idx_b: &[usize],
) -> Result<Mat, LinalgError> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: sigma.nrows(),
            cols: sigma.ncols(),
        });
    }
    for &i in idx_a.iter().chain(idx_b.iter()) {
        if i >= n {
            return Err(LinalgError::IndexOutOfRange { index: i, dim: n });
        }
    }
    for &i in idx_a {
        if idx_b.contains(&i) {
            return Err(LinalgError::OverlappingIndexSets { index: i });
        }
    }
    let saa = sigma.select_rows(idx_a).select_columns(idx_a);
    if idx_b.is_empty() {
        return Ok(symmetrize_unchecked(&saa));
    }
    let sab = sigma.select_rows(idx_a).select_columns(idx_b);
    let sbb = sigma.select_rows(idx_b).select_columns(idx_b);
    let sbb_inv = sym_pinv(&sbb)?;
    let cond = &saa - &sab * sbb_inv * sab.transpose();
    Ok(symmetrize_unchecked(&cond))
}

/// Frobenius norm.
pub fn fro_norm(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}
