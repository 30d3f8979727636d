//! Closed-form free evolution from the |++⟩ probe.
//!
//! Used as an independent oracle for the numerical propagator. Only the
//! entries whose closed forms are consistent with the master equation are
//! implemented; the (1,3) and (2,3) coherences (0-based) and their conjugates
//! are masked out and left to the propagator.

use crate::model::SystemParams;
use crate::qcore::matrix::{ComplexMatrix, C64};

/// The implemented subset of ρ(t) together with its mask.
#[derive(Debug, Clone)]
pub struct AnalyticElements {
    entries: [[Option<C64>; 4]; 4],
}

impl AnalyticElements {
    /// The closed-form value at (i, j), or `None` when masked out.
    pub fn entry(&self, i: usize, j: usize) -> Option<C64> {
        self.entries[i][j]
    }

    /// Indices carrying implemented closed forms.
    pub fn implemented(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if self.entries[i][j].is_some() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Max |analytic − numeric| over the implemented entries.
    pub fn max_diff(&self, rho: &ComplexMatrix) -> f64 {
        self.implemented()
            .into_iter()
            .map(|(i, j)| (self.entries[i][j].unwrap() - rho[(i, j)]).norm())
            .fold(0.0, f64::max)
    }

    /// Sum of the diagonal closed forms.
    pub fn diagonal_sum(&self) -> f64 {
        (0..4).map(|i| self.entries[i][i].map(|z| z.re).unwrap_or(0.0)).sum()
    }
}

/// Free-evolution solution at time `t` for the |++⟩ probe.
///
/// Decay rates follow from the local ground-state dissipators: a coherence
/// between basis states decays at half the sum of the excited-population
/// loss rates of the two states, and each populated level feeds the one
/// below it.
pub fn analytic_free_rho(t: f64, p: &SystemParams) -> AnalyticElements {
    let (g1, g2) = (p.gamma1, p.gamma2);
    let (w1, w2, g) = (p.omega1, p.omega2, p.g);
    let quarter = 0.25;
    let phase = |freq: f64| (C64::new(0.0, -freq * t)).exp();
    let decay = |rate: f64| (-rate * t).exp();

    let rho11 = C64::new(quarter * decay(g1 + g2), 0.0);
    let rho12 = C64::new(quarter * decay(g1 + 0.5 * g2), 0.0) * phase(2.0 * w2 + 2.0 * g);
    let rho13 = C64::new(quarter * decay(0.5 * g1 + g2), 0.0) * phase(2.0 * w1 + 2.0 * g);
    let rho14 = C64::new(quarter * decay(0.5 * (g1 + g2)), 0.0) * phase(2.0 * w1 + 2.0 * w2);
    let rho22 = C64::new(0.5 * decay(g1) - quarter * decay(g1 + g2), 0.0);
    let rho23 = C64::new(quarter * decay(0.5 * (g1 + g2)), 0.0) * phase(2.0 * (w1 - w2));
    let rho33 = C64::new(0.5 * decay(g2) - quarter * decay(g1 + g2), 0.0);
    let rho44 = C64::new(
        quarter * decay(g1 + g2) - 0.5 * decay(g1) - 0.5 * decay(g2) + 1.0,
        0.0,
    );

    let mut entries: [[Option<C64>; 4]; 4] = [[None; 4]; 4];
    let mut put = |i: usize, j: usize, z: C64| {
        entries[i][j] = Some(z);
        if i != j {
            entries[j][i] = Some(z.conj());
        }
    };
    put(0, 0, rho11);
    put(0, 1, rho12);
    put(0, 2, rho13);
    put(0, 3, rho14);
    put(1, 1, rho22);
    put(1, 2, rho23);
    put(2, 2, rho33);
    put(3, 3, rho44);
    // (1,3) and (2,3) stay masked.

    AnalyticElements { entries }
}
