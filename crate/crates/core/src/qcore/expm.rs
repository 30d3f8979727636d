//! Matrix exponentials by scaling and squaring.
//!
//! `mat_exp` returns the dense exponential; the `exp_action*` helpers apply
//! the exponential of a (possibly block-augmented) generator to a vector
//! without forming the dense result, which is what the propagators use in
//! their inner loops.

use crate::qcore::matrix::{ComplexMatrix, C64};

/// Truncation threshold for the scaled Taylor series.
const TERM_TOL: f64 = 1e-18;
/// Hard cap on Taylor terms; with the norm scaled to at most 1 the series
/// terminates around degree 22.
const MAX_TERMS: usize = 64;

/// exp(A) for a square complex matrix.
///
/// The norm is scaled to at most 1, the series summed to machine precision
/// and the result squared back up. exp(0) is the exact identity.
pub fn mat_exp(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.dim();
    let norm = a.norm_one();
    if norm == 0.0 {
        return ComplexMatrix::identity(n);
    }
    let squarings = scaling_steps(norm).ilog2();
    let b = a.scaled(C64::new(1.0 / 2f64.powi(squarings as i32), 0.0));

    let mut acc = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.matmul(&b).scaled(C64::new(1.0 / k as f64, 0.0));
        acc.add_scaled(&term, C64::new(1.0, 0.0));
        if term.max_abs() <= TERM_TOL * acc.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        acc = acc.matmul(&acc);
    }
    acc
}

/// Number of substeps (a power of two) bringing `norm` to at most 1.
fn scaling_steps(norm: f64) -> usize {
    let mut steps = 1usize;
    while norm / steps as f64 > 1.0 && steps < 1 << 40 {
        steps *= 2;
    }
    steps
}

/// exp(dt·Op)·v for a linear operator given as a matvec closure together
/// with an upper bound on its induced 1-norm. Scaled Taylor time-stepping;
/// exact to machine precision for the norms in play here.
pub(crate) fn exp_action_operator(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    norm_bound: f64,
    dt: f64,
    v: &[C64],
) -> Vec<C64> {
    let steps = scaling_steps(dt.abs() * norm_bound);
    let h = C64::new(dt / steps as f64, 0.0);
    let mut x = v.to_vec();
    for _ in 0..steps {
        let mut acc = x.clone();
        let mut term = x;
        for k in 1..=MAX_TERMS {
            term = apply(&term);
            let w = h / k as f64;
            for t in term.iter_mut() {
                *t *= w;
            }
            for (ai, ti) in acc.iter_mut().zip(term.iter()) {
                *ai += ti;
            }
            if vec_max(&term) <= TERM_TOL * vec_max(&acc) {
                break;
            }
        }
        x = acc;
    }
    x
}

/// exp(dt·A)·v without forming the dense exponential.
pub(crate) fn exp_action(a: &ComplexMatrix, dt: f64, v: &[C64]) -> Vec<C64> {
    exp_action_operator(|x| a.mul_vec(x), a.norm_one(), dt, v)
}

/// exp(dt·[[A, 0], [B, A]]) applied to the stacked vector [x; y].
///
/// This is the augmented-generator step: the lower-left block is the exact
/// Fréchet derivative of the segment propagator in direction B, so (x, y)
/// carries a state together with its parameter sensitivity.
pub(crate) fn exp_action_aug(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    dt: f64,
    x: &[C64],
    y: &[C64],
) -> (Vec<C64>, Vec<C64>) {
    let n = x.len();
    let stacked: Vec<C64> = x.iter().chain(y.iter()).copied().collect();
    let out = exp_action_operator(
        |v| {
            let (top, bot) = v.split_at(n);
            let mut lower = b.mul_vec(top);
            for (l, u) in lower.iter_mut().zip(a.mul_vec(bot)) {
                *l += u;
            }
            let mut result = a.mul_vec(top);
            result.extend(lower);
            result
        },
        a.norm_one() + b.norm_one(),
        dt,
        &stacked,
    );
    (out[..n].to_vec(), out[n..].to_vec())
}

fn vec_max(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
