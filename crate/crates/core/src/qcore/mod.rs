//! Dense complex linear-algebra primitives and validated quantum-state types.
//!
//! Everything is sized for the two-qubit problem: 2×2 and 4×4 operators,
//! 16×16 superoperators and the occasional augmented block in tests. The
//! routines favour determinism and robustness over speed; the dimensions are
//! tiny.

pub mod eig;
pub mod expm;
pub mod matrix;
pub mod states;
pub mod superop;

pub use eig::{hermitian_eig, HermitianEigen};
pub use expm::mat_exp;
pub use matrix::{kron, unvectorize, vectorize, ComplexMatrix, C64};
pub use states::{DensityMatrix, PureState};
pub use superop::Superoperator;
