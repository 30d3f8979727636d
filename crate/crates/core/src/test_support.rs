//! Random quantum objects shared by the unit tests.

use rand::Rng;

use crate::qcore::eig::hermitian_eig;
use crate::qcore::matrix::{ComplexMatrix, C64};
use crate::qcore::states::DensityMatrix;

pub(crate) fn random_complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

pub(crate) fn random_matrix(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| random_complex(rng))
}

pub(crate) fn random_hermitian(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let b = random_matrix(dim, rng);
    &b + &b.dagger()
}

/// Traceless Hermitian perturbation, the shape of a physical ∂ρ/∂g.
pub(crate) fn random_traceless_hermitian(rng: &mut impl Rng) -> ComplexMatrix {
    let mut h = random_hermitian(4, rng);
    let shift = h.trace() / 4.0;
    for i in 0..4 {
        h[(i, i)] -= shift;
    }
    h
}

/// Full-rank state W·Wᴴ/tr(W·Wᴴ) from a Ginibre draw.
pub(crate) fn random_full_rank(rng: &mut impl Rng) -> DensityMatrix {
    let w = random_matrix(4, rng);
    let mut m = w.matmul(&w.dagger());
    // Mix with the identity so eigenvalues stay comfortably positive.
    m.add_scaled(&ComplexMatrix::identity(4), C64::new(0.1, 0.0));
    let tr = m.trace().re;
    DensityMatrix::new(m.scaled(C64::new(1.0 / tr, 0.0))).expect("Ginibre state is valid")
}

/// Random POVM: K random PSD parts conjugated by S^{-1/2} so they sum to I.
pub(crate) fn random_povm(k: usize, rng: &mut impl Rng) -> crate::fisher::MeasurementSet {
    let parts: Vec<ComplexMatrix> = (0..k)
        .map(|_| {
            let b = random_matrix(4, rng);
            b.matmul(&b.dagger())
        })
        .collect();
    let mut total = ComplexMatrix::zeros(4);
    for part in &parts {
        total.add_scaled(part, C64::new(1.0, 0.0));
    }
    let eig = hermitian_eig(&total).expect("sum of PSD parts is Hermitian");
    let inv_sqrt = ComplexMatrix::from_fn(4, |i, j| {
        (0..4)
            .map(|m| {
                eig.eigenvectors[(i, m)]
                    * eig.eigenvectors[(j, m)].conj()
                    * C64::new(1.0 / eig.eigenvalues[m].sqrt(), 0.0)
            })
            .sum()
    });
    let elements: Vec<ComplexMatrix> = parts
        .iter()
        .map(|part| inv_sqrt.matmul(part).matmul(&inv_sqrt).hermitize())
        .collect();
    crate::fisher::MeasurementSet::new(elements).expect("conjugated parts form a POVM")
}
