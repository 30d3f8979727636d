//! 16×16 linear maps on vectorized 4×4 matrices.

use crate::qcore::matrix::{unvectorize, vectorize, ComplexMatrix, C64};
use crate::{Error, Result};

/// Linear map acting on the column-stacked vectorization of a 4×4 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    m: ComplexMatrix,
}

impl Superoperator {
    pub const DIM: usize = 16;

    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.dim() != Self::DIM {
            return Err(Error::DimensionMismatch { expected: Self::DIM, got: m.dim() });
        }
        if !m.all_finite() {
            return Err(Error::InvalidConfig("superoperator has non-finite entries".into()));
        }
        Ok(Self { m })
    }

    pub fn zero() -> Self {
        Self { m: ComplexMatrix::zeros(Self::DIM) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        self.m.mul_vec(v)
    }

    /// Apply to a 4×4 matrix: unvec(M·vec(ρ)).
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        unvectorize(&self.apply_vec(&vectorize(rho)))
            .expect("16-vector always unstacks to a 4x4 matrix")
    }

    /// Hilbert-Schmidt adjoint (conjugate transpose of the 16×16 matrix).
    pub fn adjoint(&self) -> Self {
        Self { m: self.m.dagger() }
    }

    /// In-place `self += w * other`.
    pub fn add_scaled(&mut self, other: &Self, w: f64) {
        self.m.add_scaled(&other.m, C64::new(w, 0.0));
    }

    pub fn scaled(&self, w: f64) -> Self {
        Self { m: self.m.scaled(C64::new(w, 0.0)) }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m.max_abs_diff(&other.m)
    }

    /// Max |d tr/dt| over basis matrices: ‖vec(I)ᴴ·M‖∞. Zero for any
    /// trace-preserving generator.
    pub fn trace_preservation_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..Self::DIM {
            let mut acc = C64::new(0.0, 0.0);
            for d in 0..4 {
                acc += self.m[(5 * d, j)];
            }
            worst = worst.max(acc.norm());
        }
        worst
    }
}
