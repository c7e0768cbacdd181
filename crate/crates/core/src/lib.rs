//! Rate region of vector Gaussian successive refinement with degraded side
//! information.
//!
//! A source vector `X ~ N(0, K0)` is encoded in `L` stages; the stage-`i`
//! decoder sees side information `Y_i = X + N_i` with noise covariances
//! forming a strict Loewner chain `K_1 > ... > K_L`, and must reconstruct
//! under a covariance distortion constraint `D_i`. The achievable rate
//! region is parameterized by PSD increments `B_i`, and the weighted
//! sum-rate boundary is the solution of a log-det matrix program whose KKT
//! points are globally optimal thanks to an extremal inequality.
//!
//! The crate provides:
//!
//! - [`linalg`]: deterministic symmetric-matrix primitives (spectral
//!   decomposition, PSD tests and projections, Loewner comparisons,
//!   log-determinants, Schur-complement conditioning);
//! - [`model`]: problem instances, feasibility geometry, allocation
//!   bookkeeping;
//! - [`gauss_info`]: closed-form Gaussian information functionals over
//!   labeled joint covariances plus numerical checkers for the Fisher
//!   information / MMSE identities the theory rests on;
//! - [`region`]: rate-region evaluation, the Gaussian achievability
//!   construction with mutual-information cross-checks, and the closed-form
//!   Gaussian value of the extremal functional;
//! - [`solver`]: the weighted-sum-rate solver with KKT multiplier recovery
//!   and residual certification, plus boundary tracing over weight grids;
//! - [`extremal`]: the monotone-path construction, derivative-formula
//!   checks, and extremal-inequality verification;
//! - [`oracle`]: independent brute-force baselines and seeded generators
//!   for property tests.

pub mod extremal;
pub mod gauss_info;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod region;
pub mod solver;

/// Dense square matrix of f64, the working type everywhere in this crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense vector of f64.
pub type Vecf = nalgebra::DVector<f64>;
