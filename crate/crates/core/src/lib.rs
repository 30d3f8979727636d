//! Desk-scale simulation and estimation toolkit for a dissipative ZZ-coupled
//! two-qubit system.
//!
//! The library covers the full estimation pipeline for the coupling strength
//! `g` of the pair:
//!
//! - [`qcore`] — dense complex linear algebra and validated quantum states,
//! - [`model`] — Hamiltonians, dissipators and the three evolution generators
//!   (free, jump feedback, imperfect detection),
//! - [`dynamics`] — piecewise-constant propagation of states and their
//!   parameter sensitivities,
//! - [`fisher`] — SLD, quantum/classical Fisher information and optimal
//!   measurements,
//! - [`analytic`] — the closed-form free-evolution solution used as an
//!   independent oracle,
//! - [`grape`] — gradient-ascent optimization of the hybrid control scheme,
//! - [`bayes`] — the batched adaptive Bayesian recovery protocol.
//!
//! All types are plain immutable data and safe to share across threads;
//! sweeps over parameter grids parallelize with rayon.

pub mod analytic;
pub mod bayes;
pub mod dynamics;
pub mod fisher;
pub mod grape;
pub mod model;
pub mod qcore;

#[cfg(test)]
pub(crate) mod test_support;

pub use qcore::matrix::{kron, unvectorize, vectorize, ComplexMatrix, C64};
pub use qcore::states::{DensityMatrix, PureState};

/// Errors surfaced by the toolkit.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A matrix expected to be Hermitian failed the symmetry check.
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    /// An input had the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A propagated state violated the density-matrix tolerances.
    #[error("invalid state at segment {segment}: {reason}")]
    InvalidState { segment: usize, reason: String },
    /// The state support vanished; no SLD can be formed.
    #[error("density matrix support is numerically empty")]
    DegenerateSupport,
    /// A measurement outcome has vanishing probability but finite sensitivity.
    #[error("outcome {index} has probability <= 1e-12 but |dp| = {dp:.3e}; CFI is ill-posed")]
    SingularOutcome { index: usize, dp: f64 },
    /// Every grid point was assigned (numerically) zero likelihood.
    #[error("posterior update normalizer vanished")]
    DegeneratePosterior,
    /// A configuration value was out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
