//! Validated quantum-state types for the two-qubit system.
//!
//! Basis order is |00⟩,|01⟩,|10⟩,|11⟩ with |0⟩ the excited level and |1⟩ the
//! ground level of each qubit; the doubly excited population therefore sits
//! at entry (0,0) and the steady state of the dissipators at (3,3).

use crate::qcore::eig::hermitian_eig;
use crate::qcore::matrix::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Normalized four-amplitude pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: [C64; 4],
}

impl PureState {
    /// Norm tolerance on construction.
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(amps: [C64; 4]) -> Result<Self> {
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::InvalidConfig(format!(
                "pure state squared norm {norm_sqr} is not 1 within {:.0e}",
                Self::NORM_TOL
            )));
        }
        Ok(Self { amps })
    }

    /// |++⟩ = (|00⟩+|01⟩+|10⟩+|11⟩)/2.
    pub fn plus_plus() -> Self {
        let half = C64::new(0.5, 0.0);
        Self { amps: [half; 4] }
    }

    /// (|00⟩+|11⟩)/√2.
    pub fn bell_phi_plus() -> Self {
        let w = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self { amps: [w, zero, zero, w] }
    }

    /// (|01⟩+|10⟩)/√2.
    pub fn bell_psi_plus() -> Self {
        let w = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self { amps: [zero, w, w, zero] }
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.amps
    }

    /// ⟨σz⊗σz⟩ = |a|² − |b|² − |c|² + |d|².
    pub fn zz_expectation(&self) -> f64 {
        self.amps[0].norm_sqr() - self.amps[1].norm_sqr() - self.amps[2].norm_sqr()
            + self.amps[3].norm_sqr()
    }

    /// |ψ⟩⟨ψ| as a validated density matrix.
    pub fn density(&self) -> DensityMatrix {
        let m = ComplexMatrix::from_fn(4, |i, j| self.amps[i] * self.amps[j].conj());
        DensityMatrix::new(m).expect("projector onto a normalized state is a valid density matrix")
    }
}

/// 4×4 Hermitian, unit-trace, positive-semidefinite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    /// Smallest eigenvalue allowed; slack for accumulated roundoff.
    pub const EIGENVALUE_FLOOR: f64 = -1e-8;

    /// Validate and store; the stored matrix is the hermitized copy.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: m.dim() });
        }
        if !m.all_finite() {
            return Err(Error::InvalidConfig("density matrix has non-finite entries".into()));
        }
        let asym = m.hermiticity_error();
        if asym > Self::HERMITICITY_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let m = m.hermitize();
        let trace_err = (m.trace() - C64::new(1.0, 0.0)).norm();
        if trace_err > Self::TRACE_TOL {
            return Err(Error::InvalidConfig(format!(
                "density matrix trace off by {trace_err:.3e}"
            )));
        }
        let eig = hermitian_eig(&m)?;
        let min = eig.min_eigenvalue();
        if min < Self::EIGENVALUE_FLOOR {
            return Err(Error::InvalidConfig(format!(
                "density matrix has eigenvalue {min:.3e} below the positivity floor"
            )));
        }
        Ok(Self { m })
    }

    /// I/4.
    pub fn maximally_mixed() -> Self {
        Self { m: ComplexMatrix::identity(4).scaled(C64::new(0.25, 0.0)) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// tr(ρ²).
    pub fn purity(&self) -> f64 {
        self.m.matmul(&self.m).trace().re
    }

    /// tr(ρ·op).
    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        self.m.matmul(op).trace()
    }
}
