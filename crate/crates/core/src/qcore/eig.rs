//! Hermitian eigendecomposition by cyclic Jacobi rotations.
//!
//! The matrices are at most 4×4, so a dependency-free Jacobi sweep is both
//! fast enough and fully deterministic, which matters downstream: measurement
//! bases derived from eigenvectors must be reproducible across runs.

use crate::qcore::matrix::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Symmetry tolerance for inputs that claim to be Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 60;

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending; column `k` of `eigenvectors` pairs with
/// `eigenvalues[k]`. Each column's first component of significant magnitude
/// is made real and positive so the decomposition is unique up to exact
/// degeneracies.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Σ λᵢ vᵢvᵢᴴ.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| {
                    self.eigenvalues[k]
                        * self.eigenvectors[(i, k)]
                        * self.eigenvectors[(j, k)].conj()
                })
                .sum()
        })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Column `k` as an owned vector.
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        let n = self.eigenvalues.len();
        (0..n).map(|i| self.eigenvectors[(i, k)]).collect()
    }
}

/// Diagonalize a Hermitian matrix.
///
/// Fails with [`Error::NotHermitian`] when the symmetry error exceeds 1e-10;
/// the computation itself runs on the hermitized (A+Aᴴ)/2 copy.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEigen> {
    let asym = a.hermiticity_error();
    if asym > HERMITICITY_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let n = a.dim();
    let mut m = a.hermitize();
    let mut v = ComplexMatrix::identity(n);
    let scale = 1.0 + m.frobenius();
    let target = 1e-14 * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap().then(i.cmp(&j))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut eigenvectors = ComplexMatrix::from_fn(n, |i, k| v[(i, order[k])]);
    fix_phases(&mut eigenvectors);

    Ok(HermitianEigen { eigenvalues, eigenvectors })
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation zeroing m[p,q] (and m[q,p]), accumulated into `v`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let z = m[(p, q)];
    let zn = z.norm();
    if zn <= 1e-300 {
        return;
    }
    // Unitary 2x2 block [[c, -s e^{i phi}], [s e^{-i phi}, c]] with
    // z = |z| e^{i phi} and tan(2 theta) = 2|z| / (m_pp - m_qq).
    let phase = z / zn;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let u = (app - aqq) / (2.0 * zn);
    let t = if u == 0.0 {
        1.0
    } else {
        u.signum() / (u.abs() + (u * u + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let n = m.dim();
    // Column update: B = M J.
    for i in 0..n {
        let mip = m[(i, p)];
        let miq = m[(i, q)];
        m[(i, p)] = c * mip + s * phase.conj() * miq;
        m[(i, q)] = -s * phase * mip + c * miq;
    }
    // Row update: M' = J^H B.
    for j in 0..n {
        let mpj = m[(p, j)];
        let mqj = m[(q, j)];
        m[(p, j)] = c * mpj + s * phase * mqj;
        m[(q, j)] = -s * phase.conj() * mpj + c * mqj;
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);

    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = c * vip + s * phase.conj() * viq;
        v[(i, q)] = -s * phase * vip + c * viq;
    }
}

/// Make the first component with magnitude above 1e-10 real positive.
fn fix_phases(vectors: &mut ComplexMatrix) {
    let n = vectors.dim();
    for k in 0..n {
        let mut pivot = None;
        for i in 0..n {
            if vectors[(i, k)].norm() > 1e-10 {
                pivot = Some(vectors[(i, k)]);
                break;
            }
        }
        if let Some(z) = pivot {
            let w = z.conj() / z.norm();
            for i in 0..n {
                let rotated = vectors[(i, k)] * w;
                vectors[(i, k)] = rotated;
            }
        }
    }
}
