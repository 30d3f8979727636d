//! Square complex matrices with row-major storage.
//!
//! Vectorization uses column stacking: `vec(ρ)[i + dim*j] = ρ[i,j]`, so that
//! vec(AρB) = (Bᵀ⊗A)vec(ρ). All superoperator assembly relies on that single
//! convention.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Real diagonal matrix.
    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| {
            if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    dst[j] += a * row[j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "mul_vec dimension mismatch");
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += row[j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// In-place `self += w * other`.
    pub fn add_scaled(&mut self, other: &Self, w: C64) {
        assert_eq!(self.dim, other.dim, "add_scaled dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += w * b;
        }
    }

    pub fn scaled(&self, w: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| w * z).collect() }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// (A + Aᴴ)/2.
    pub fn hermitize(&self) -> Self {
        Self::from_fn(self.dim, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()))
    }

    /// Max entrywise |A − Aᴴ|.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff dimension mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (max column abs sum); used to pick exponential scalings.
    pub fn norm_one(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|j| (0..n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, C64::new(1.0, 0.0));
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, C64::new(-1.0, 0.0));
        out
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// AB − BA.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

/// Kronecker product, (A⊗B)[(i·nB+k),(j·nB+l)] = A[i,j]·B[k,l].
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(na * nb, |r, c| {
        let (i, k) = (r / nb, r % nb);
        let (j, l) = (c / nb, c % nb);
        a[(i, j)] * b[(k, l)]
    })
}

/// Column-stacking vectorization: out[i + n*j] = m[i,j].
pub fn vectorize(m: &ComplexMatrix) -> Vec<C64> {
    let n = m.dim();
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            out[i + n * j] = m[(i, j)];
        }
    }
    out
}

/// Inverse of [`vectorize`]; the input length must be a perfect square.
pub fn unvectorize(v: &[C64]) -> Result<ComplexMatrix> {
    let n = (v.len() as f64).sqrt().round() as usize;
    if n * n != v.len() {
        return Err(Error::DimensionMismatch { expected: n * n, got: v.len() });
    }
    Ok(ComplexMatrix::from_fn(n, |i, j| v[i + n * j]))
}
