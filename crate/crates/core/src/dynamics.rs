//! Piecewise-constant propagation of states and coupling sensitivities.
//!
//! Each segment is advanced by the exact exponential of its 16×16 generator;
//! sensitivities ride along through the block-triangular augmented generator
//! [[𝓛, 0], [∂𝓛/∂g, 𝓛]], whose exponential propagates (ρ, ∂ρ/∂g) jointly.

use crate::model::{build_hc, build_liouvillian, coupling_superop, ControlVector, EvolutionMode, SystemParams};
use crate::qcore::expm::{exp_action, exp_action_aug, mat_exp};
use crate::qcore::matrix::{unvectorize, vectorize, ComplexMatrix, C64};
use crate::qcore::states::DensityMatrix;
use crate::qcore::superop::Superoperator;
use crate::{Error, Result};

/// Uniform segmentation of the evolution window [0, T].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    segments: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, segments: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidConfig(format!("total time {t_final} must be positive")));
        }
        if segments == 0 {
            return Err(Error::InvalidConfig("need at least one segment".into()));
        }
        Ok(Self { t_final, segments })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.segments as f64
    }

    /// Segment boundaries 0, dt, …, T.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.segments).map(|n| n as f64 * self.dt()).collect()
    }
}

impl Default for TimeGrid {
    /// The grid used throughout the study: T = 80 split into 100 segments.
    fn default() -> Self {
        Self { t_final: 80.0, segments: 100 }
    }
}

/// States (and optionally coupling sensitivities) at every segment boundary.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// ∂ρ/∂g at each boundary when propagated with sensitivities.
    pub sensitivities: Option<Vec<ComplexMatrix>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_sensitivity(&self) -> Option<&ComplexMatrix> {
        self.sensitivities.as_ref().and_then(|s| s.last())
    }
}

/// Evolve `rho0` through `grid.segments()` piecewise-constant segments.
///
/// `controls` must provide one [`ControlVector`] per segment (all zeros for
/// uncontrolled runs). Every propagated state is hermitized and re-validated.
pub fn propagate(
    rho0: &DensityMatrix,
    p: &SystemParams,
    controls: &[ControlVector],
    mode: EvolutionMode,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let gens = segment_generators(p, controls, mode, grid)?;
    propagate_generators(rho0, &gens, None, grid)
}

/// As [`propagate`], but also integrates ∂ρ/∂g through the augmented
/// generator, starting from ∂ρ₀/∂g = 0.
pub fn propagate_with_sensitivity(
    rho0: &DensityMatrix,
    p: &SystemParams,
    controls: &[ControlVector],
    mode: EvolutionMode,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let gens = segment_generators(p, controls, mode, grid)?;
    propagate_generators(rho0, &gens, Some(&coupling_superop()), grid)
}

/// One generator per segment; collapses to a single shared generator when all
/// segment controls coincide.
pub(crate) fn segment_generators(
    p: &SystemParams,
    controls: &[ControlVector],
    mode: EvolutionMode,
    grid: &TimeGrid,
) -> Result<Vec<Superoperator>> {
    if controls.len() != grid.segments() {
        return Err(Error::DimensionMismatch { expected: grid.segments(), got: controls.len() });
    }
    if controls.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidConfig("control amplitudes must be finite".into()));
    }
    let uniform = controls.windows(2).all(|w| w[0] == w[1]);
    if uniform {
        let gen = build_liouvillian(p, &build_hc(&controls[0]), mode);
        Ok(vec![gen; 1])
    } else {
        Ok(controls.iter().map(|u| build_liouvillian(p, &build_hc(u), mode)).collect())
    }
}

/// Core loop shared by both public propagators. `gens` holds either one
/// generator (uniform controls) or one per segment.
pub(crate) fn propagate_generators(
    rho0: &DensityMatrix,
    gens: &[Superoperator],
    sensitivity_gen: Option<&Superoperator>,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let m = grid.segments();
    let dt = grid.dt();
    let uniform = gens.len() == 1;
    if !uniform && gens.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: gens.len() });
    }

    // With a single shared generator the dense exponential is formed once and
    // each segment becomes a matrix-vector product.
    let dense_step = if uniform {
        match sensitivity_gen {
            None => Some(mat_exp(&gens[0].matrix().scaled(C64::new(dt, 0.0)))),
            Some(lg) => Some(mat_exp(&augmented_block(gens[0].matrix(), lg.matrix(), dt))),
        }
    } else {
        None
    };

    let mut states = Vec::with_capacity(m + 1);
    let mut sens_out = sensitivity_gen.map(|_| {
        let mut v = Vec::with_capacity(m + 1);
        v.push(ComplexMatrix::zeros(4));
        v
    });
    states.push(rho0.clone());

    let mut x = vectorize(rho0.matrix());
    let mut y = vec![C64::new(0.0, 0.0); 16];

    for seg in 0..m {
        let gen = if uniform { &gens[0] } else { &gens[seg] };
        match (sensitivity_gen, &dense_step) {
            (None, Some(step)) => {
                x = step.mul_vec(&x);
            }
            (None, None) => {
                x = exp_action(gen.matrix(), dt, &x);
            }
            (Some(_), Some(step)) => {
                let stacked: Vec<C64> = x.iter().chain(y.iter()).copied().collect();
                let out = step.mul_vec(&stacked);
                x = out[..16].to_vec();
                y = out[16..].to_vec();
            }
            (Some(lg), None) => {
                let (nx, ny) = exp_action_aug(gen.matrix(), lg.matrix(), dt, &x, &y);
                x = nx;
                y = ny;
            }
        }

        let rho = unvectorize(&x)?.hermitize();
        let state = DensityMatrix::new(rho).map_err(|e| Error::InvalidState {
            segment: seg + 1,
            reason: e.to_string(),
        })?;
        x = vectorize(state.matrix());
        states.push(state);

        if let Some(out) = sens_out.as_mut() {
            let s = unvectorize(&y)?.hermitize();
            let tr = s.trace().norm();
            if tr > 1e-10 {
                return Err(Error::InvalidState {
                    segment: seg + 1,
                    reason: format!("sensitivity trace drifted to {tr:.3e}"),
                });
            }
            y = vectorize(&s);
            out.push(s);
        }
    }

    Ok(Trajectory { times: grid.times(), states, sensitivities: sens_out })
}

/// Dense [[L, 0], [Lg, L]]·dt block for the uniform-control fast path.
fn augmented_block(l: &ComplexMatrix, lg: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let n = l.dim();
    ComplexMatrix::from_fn(2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let entry = match (bi, bj) {
            (0, 0) | (1, 1) => l[(i % n, j % n)],
            (1, 0) => lg[(i % n, j % n)],
            _ => C64::new(0.0, 0.0),
        };
        entry * dt
    })
}
