//! Batched adaptive Bayesian recovery of the coupling strength.
//!
//! A uniform grid prior over candidate couplings is updated sequentially
//! from measurement outcomes sampled out of the true model. Batches share
//! one POVM; after each batch the posterior mean selects the next POVM from
//! the SLD eigenbasis at the estimate, and under the hybrid scheme also
//! re-optimizes the control field before the next batch.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;

use crate::dynamics::{propagate, propagate_with_sensitivity, TimeGrid};
use crate::fisher::{compute_sld, optimal_povm_from_sld, optimal_probe, MeasurementSet};
use crate::grape::{optimize_from, GradientMethod, GrapeConfig};
use crate::model::{ControlVector, EvolutionMode, FeedbackChannels, FeedbackConfig, SystemParams};
use crate::qcore::matrix::{ComplexMatrix, C64};
use crate::qcore::states::DensityMatrix;
use crate::{Error, Result};

/// Likelihood floor applied inside updates so clamped-to-zero outcome
/// probabilities cannot permanently lock a grid point out.
pub const LIKELIHOOD_FLOOR: f64 = 1e-12;

/// Control scheme active during the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Free evolution.
    None,
    /// Jump feedback at λ = π/2.
    Feedback,
    /// Feedback plus per-batch re-optimized Hamiltonian control.
    Hybrid,
}

/// How outcome sequences are generated from the theoretical distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Exact expected proportions (largest remainder), shuffled.
    Perfect,
    /// Independent draws through the cumulative-probability roulette wheel.
    Imperfect,
}

/// Discretized probability distribution over candidate couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl PosteriorGrid {
    pub const POINTS: usize = 100;
    pub const G_MIN: f64 = 0.0;
    pub const G_MAX: f64 = 0.2;

    /// The protocol prior: 100 equally spaced couplings on [0, 0.2],
    /// endpoints included, uniform weights.
    pub fn uniform() -> Self {
        let step = (Self::G_MAX - Self::G_MIN) / (Self::POINTS - 1) as f64;
        let values = (0..Self::POINTS).map(|i| Self::G_MIN + step * i as f64).collect();
        let probs = vec![1.0 / Self::POINTS as f64; Self::POINTS];
        Self { values, probs }
    }

    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::InvalidConfig("grid and weights must have equal nonzero length".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("grid values must be strictly increasing".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig("weights must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { values, probs })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn normalization_error(&self) -> f64 {
        (self.probs.iter().sum::<f64>() - 1.0).abs()
    }
}

/// Protocol configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesConfig {
    /// Number of batches (N).
    pub batches: usize,
    /// Copies measured per batch (R).
    pub copies_per_batch: usize,
    pub scheme: Scheme,
    pub sample_kind: SampleKind,
    pub seed: u64,
    pub grid: TimeGrid,
    /// True coupling used to simulate the measured system.
    pub g_true: f64,
    /// Base physical parameters; the coupling field is swept over the grid.
    pub params: SystemParams,
    pub channels: FeedbackChannels,
    /// Per-batch ascent budget for the hybrid scheme.
    pub grape_iterations: usize,
}

impl BayesConfig {
    pub fn new(scheme: Scheme, sample_kind: SampleKind, seed: u64) -> Self {
        Self {
            batches: 20,
            copies_per_batch: 100,
            scheme,
            sample_kind,
            seed,
            grid: TimeGrid::default(),
            g_true: 0.1,
            params: SystemParams::symmetric(1.0, 0.1, 0.05).expect("valid defaults"),
            channels: FeedbackChannels::First,
            grape_iterations: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batches == 0 || self.copies_per_batch == 0 {
            return Err(Error::InvalidConfig("need at least one batch and one copy".into()));
        }
        if !self.g_true.is_finite() {
            return Err(Error::InvalidConfig("true coupling must be finite".into()));
        }
        Ok(())
    }

    fn mode(&self) -> EvolutionMode {
        match self.scheme {
            Scheme::None => EvolutionMode::Free,
            Scheme::Feedback | Scheme::Hybrid => EvolutionMode::Feedback(
                FeedbackConfig::new(FRAC_PI_2, 1.0, self.channels).expect("pi/2 feedback"),
            ),
        }
    }
}

/// Everything recorded for one batch.
#[derive(Debug, Clone)]
pub struct BatchRecord {
    pub estimate: f64,
    pub posterior: PosteriorGrid,
    /// POVM used to measure this batch.
    pub povm: MeasurementSet,
    pub outcome_counts: [usize; 4],
    /// FNV-1a digest of the outcome sequence.
    pub sequence_digest: u64,
}

/// Full protocol output.
#[derive(Debug, Clone)]
pub struct EstimateRecord {
    pub estimates: Vec<f64>,
    pub batches: Vec<BatchRecord>,
    /// Mean squared error of the per-batch estimates against the truth.
    pub mse: f64,
}

/// The fixed initial POVM: four rank-1 projectors with ±1/4 and ±i/4
/// entries, robust over the whole prior range.
pub fn initial_povm() -> MeasurementSet {
    // Entries in units of 1/4, encoded (re, im).
    const TABLES: [[[(i8, i8); 4]; 4]; 4] = [
        [
            [(1, 0), (0, 1), (0, 1), (1, 0)],
            [(0, -1), (1, 0), (1, 0), (0, -1)],
            [(0, -1), (1, 0), (1, 0), (0, -1)],
            [(1, 0), (0, 1), (0, 1), (1, 0)],
        ],
        [
            [(1, 0), (0, 1), (0, -1), (-1, 0)],
            [(0, -1), (1, 0), (-1, 0), (0, 1)],
            [(0, 1), (-1, 0), (1, 0), (0, -1)],
            [(-1, 0), (0, -1), (0, 1), (1, 0)],
        ],
        [
            [(1, 0), (0, -1), (0, 1), (-1, 0)],
            [(0, 1), (1, 0), (-1, 0), (0, -1)],
            [(0, -1), (-1, 0), (1, 0), (0, 1)],
            [(-1, 0), (0, 1), (0, -1), (1, 0)],
        ],
        [
            [(1, 0), (0, -1), (0, -1), (1, 0)],
            [(0, 1), (1, 0), (1, 0), (0, 1)],
            [(0, 1), (1, 0), (1, 0), (0, 1)],
            [(1, 0), (0, -1), (0, -1), (1, 0)],
        ],
    ];
    let elements = TABLES
        .iter()
        .map(|rows| {
            ComplexMatrix::from_fn(4, |i, j| {
                let (re, im) = rows[i][j];
                C64::new(re as f64 * 0.25, im as f64 * 0.25)
            })
        })
        .collect();
    MeasurementSet::new(elements).expect("the constant set is a projective POVM")
}

/// Outcome distribution Tr(ρ·Mₗ), clamped at zero and renormalized.
pub fn outcome_probs(rho: &DensityMatrix, povm: &MeasurementSet) -> Vec<f64> {
    let mut probs: Vec<f64> = povm
        .elements()
        .iter()
        .map(|m| {
            let p = rho.matrix().matmul(m).trace().re;
            debug_assert!(p >= -1e-10, "outcome probability {p} below clamp slack");
            p.max(0.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in probs.iter_mut() {
            *p /= total;
        }
    }
    probs
}

/// Outcome sequence with exact expected proportions.
///
/// Counts are the largest-remainder rounding of R·p (ties broken by outcome
/// index), and the order is a uniform shuffle from the caller's generator.
pub fn sample_perfect(probs: &[f64], copies: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut counts: Vec<usize> = probs.iter().map(|p| (p * copies as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = probs
        .iter()
        .enumerate()
        .map(|(idx, p)| (idx, p * copies as f64 - counts[idx] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..copies.saturating_sub(assigned) {
        counts[remainders[k % remainders.len()].0] += 1;
    }
    let mut sequence = Vec::with_capacity(copies);
    for (label, count) in counts.iter().enumerate() {
        sequence.extend(std::iter::repeat(label).take(*count));
    }
    sequence.shuffle(rng);
    sequence
}

/// Independent multinomial draws via the cumulative-probability wheel:
/// outcome l for u ∈ (d_{l−1}, d_l].
pub fn sample_roulette(probs: &[f64], copies: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut cumulative: Vec<f64> = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    (0..copies)
        .map(|_| {
            let u: f64 = rng.random();
            cumulative
                .iter()
                .position(|d| u <= *d)
                .unwrap_or(probs.len() - 1)
        })
        .collect()
}

/// One Bayes step: posterior ∝ prior × P(outcome | g), renormalized.
pub fn posterior_update(
    grid: &PosteriorGrid,
    outcome: usize,
    likelihood_table: &[[f64; 4]],
) -> Result<PosteriorGrid> {
    if likelihood_table.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: likelihood_table.len() });
    }
    let mut probs: Vec<f64> = grid
        .probs
        .iter()
        .zip(likelihood_table)
        .map(|(prior, row)| prior * row[outcome].max(LIKELIHOOD_FLOOR))
        .collect();
    let normalizer: f64 = probs.iter().sum();
    if normalizer <= 1e-300 {
        return Err(Error::DegeneratePosterior);
    }
    for p in probs.iter_mut() {
        *p /= normalizer;
    }
    Ok(PosteriorGrid { values: grid.values.clone(), probs })
}

/// Posterior mean Σ gᵢ·P(gᵢ).
pub fn posterior_mean(grid: &PosteriorGrid) -> f64 {
    grid.values.iter().zip(&grid.probs).map(|(v, p)| v * p).sum()
}

/// SLD eigenprojectors at the current estimate under the active scheme.
pub fn refresh_povm(
    g_hat: f64,
    scheme: Scheme,
    channels: FeedbackChannels,
    controls: &[ControlVector],
    params: &SystemParams,
    grid: &TimeGrid,
) -> Result<MeasurementSet> {
    let mode = match scheme {
        Scheme::None => EvolutionMode::Free,
        Scheme::Feedback | Scheme::Hybrid => {
            EvolutionMode::Feedback(FeedbackConfig::new(FRAC_PI_2, 1.0, channels)?)
        }
    };
    let rho0 = optimal_probe().density();
    let traj =
        propagate_with_sensitivity(&rho0, &params.with_coupling(g_hat), controls, mode, grid)?;
    let sld = compute_sld(
        traj.final_state(),
        traj.final_sensitivity().expect("sensitivity was requested"),
    )?;
    Ok(optimal_povm_from_sld(&sld))
}

/// Run the full batched protocol.
pub fn run_protocol(config: &BayesConfig) -> Result<EstimateRecord> {
    config.validate()?;
    let rho0 = optimal_probe().density();
    let prior = PosteriorGrid::uniform();
    let mode = config.mode();

    let mut posterior = prior.clone();
    let mut povm = initial_povm();
    let mut controls = vec![ControlVector::zero(); config.grid.segments()];
    let mut estimates: Vec<f64> = Vec::with_capacity(config.batches);
    let mut batches: Vec<BatchRecord> = Vec::with_capacity(config.batches);

    // With static controls the grid states never change across batches.
    let mut cached_states: Option<(Vec<DensityMatrix>, DensityMatrix)> = None;

    for batch_idx in 0..config.batches {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(batch_idx as u64 + 1);

        // (1) Controls for this batch. The hybrid scheme runs feedback-only
        // in batch 1, then re-optimizes at the current estimate, warm-started
        // from the previous batch's controls.
        if config.scheme == Scheme::Hybrid && batch_idx >= 1 {
            let g_hat = estimates[batch_idx - 1];
            let grape = GrapeConfig {
                grid: config.grid,
                epsilon: 0.01,
                iterations: config.grape_iterations,
                clip: Some(0.2),
                mode,
                gradient_method: GradientMethod::Adjoint,
                restarts: None,
            };
            let run = optimize_from(&grape, &config.params.with_coupling(g_hat), &rho0, controls)?;
            controls = run.best_controls;
            cached_states = None;
        }

        // The measurement adapts once per batch: SLD eigenprojectors at the
        // previous estimate, evaluated under the controls this batch will
        // actually apply.
        if batch_idx >= 1 {
            povm = refresh_povm(
                estimates[batch_idx - 1],
                config.scheme,
                config.channels,
                &controls,
                &config.params,
                &config.grid,
            )?;
        }

        // (2) Evolve the grid couplings and the truth to T.
        let (grid_states, rho_true) = match &cached_states {
            Some((states, truth)) => (states.clone(), truth.clone()),
            None => {
                let states: Vec<DensityMatrix> = prior
                    .values()
                    .par_iter()
                    .map(|&g| {
                        propagate(&rho0, &config.params.with_coupling(g), &controls, mode, &config.grid)
                            .map(|t| t.final_state().clone())
                    })
                    .collect::<Result<_>>()?;
                let truth = propagate(
                    &rho0,
                    &config.params.with_coupling(config.g_true),
                    &controls,
                    mode,
                    &config.grid,
                )?
                .final_state()
                .clone();
                if config.scheme != Scheme::Hybrid {
                    cached_states = Some((states.clone(), truth.clone()));
                }
                (states, truth)
            }
        };

        let table: Vec<[f64; 4]> = grid_states
            .iter()
            .map(|rho| {
                let probs = outcome_probs(rho, &povm);
                [probs[0], probs[1], probs[2], probs[3]]
            })
            .collect();

        // (3) Sample this batch's outcome sequence from the truth.
        let true_probs = outcome_probs(&rho_true, &povm);
        let sequence = match config.sample_kind {
            SampleKind::Perfect => sample_perfect(&true_probs, config.copies_per_batch, &mut rng),
            SampleKind::Imperfect => sample_roulette(&true_probs, config.copies_per_batch, &mut rng),
        };

        // (4) Sequential Bayes updates over the batch.
        for &outcome in &sequence {
            posterior = posterior_update(&posterior, outcome, &table)?;
        }

        // (5) Batch estimate.
        let estimate = posterior_mean(&posterior);
        estimates.push(estimate);

        let mut counts = [0usize; 4];
        for &outcome in &sequence {
            counts[outcome] += 1;
        }
        batches.push(BatchRecord {
            estimate,
            posterior: posterior.clone(),
            povm: povm.clone(),
            outcome_counts: counts,
            sequence_digest: fnv1a(&sequence),
        });
    }

    let mse = estimates
        .iter()
        .map(|e| (e - config.g_true) * (e - config.g_true))
        .sum::<f64>()
        / config.batches as f64;

    Ok(EstimateRecord { estimates, batches, mse })
}

fn fnv1a(sequence: &[usize]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &x in sequence {
        hash ^= x as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{cfi, qfi};
    use crate::qcore::eig::hermitian_eig;

    #[test]
    fn initial_povm_is_a_rank_one_projective_set() {
        let povm = initial_povm();
        let mut total = ComplexMatrix::zeros(4);
        for m in povm.elements() {
            total.add_scaled(m, C64::new(1.0, 0.0));
            let eig = hermitian_eig(m).unwrap();
            let mut sorted = eig.eigenvalues.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected = [0.0, 0.0, 0.0, 1.0];
            for (lam, want) in sorted.iter().zip(expected) {
                assert!((lam - want).abs() <= 1e-14, "eigenvalue {lam}");
            }
        }
        assert!(total.max_abs_diff(&ComplexMatrix::identity(4)) <= 1e-15);

        let m0 = &povm.elements()[0];
        let m3 = &povm.elements()[3];
        assert!((m0[(0, 1)] - C64::new(0.0, 0.25)).norm() <= 1e-15);
        assert!((m3[(0, 1)] - C64::new(0.0, -0.25)).norm() <= 1e-15);
    }

    #[test]
    fn maximally_mixed_state_is_uniform_over_outcomes() {
        let probs = outcome_probs(&DensityMatrix::maximally_mixed(), &initial_povm());
        for p in probs {
            assert!((p - 0.25).abs() <= 1e-12);
        }
    }

    #[test]
    fn projector_state_selects_its_own_outcome() {
        let povm = initial_povm();
        let rho = DensityMatrix::new(povm.elements()[2].clone()).unwrap();
        let probs = outcome_probs(&rho, &povm);
        assert!((probs[2] - 1.0).abs() <= 1e-12);
        for (l, p) in probs.iter().enumerate() {
            if l != 2 {
                assert!(p.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn outcome_probs_always_normalize() {
        let mut rng = ChaCha12Rng::seed_from_u64(81);
        let povm = initial_povm();
        for _ in 0..50 {
            let rho = crate::test_support::random_full_rank(&mut rng);
            let probs = outcome_probs(&rho, &povm);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            assert!(probs.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn perfect_sampling_counts_follow_largest_remainder() {
        let mut rng = ChaCha12Rng::seed_from_u64(82);

        let seq = sample_perfect(&[0.25, 0.25, 0.25, 0.25], 100, &mut rng);
        assert_eq!(count(&seq), [25, 25, 25, 25]);

        let seq = sample_perfect(&[1.0, 0.0, 0.0, 0.0], 100, &mut rng);
        assert_eq!(count(&seq), [100, 0, 0, 0]);

        let seq = sample_perfect(&[0.255, 0.245, 0.25, 0.25], 100, &mut rng);
        assert_eq!(count(&seq), [26, 24, 25, 25]);
    }

    #[test]
    fn perfect_sampling_is_a_shuffle_not_a_block() {
        // Same counts, different order across batstreams.
        let mut rng_a = ChaCha12Rng::seed_from_u64(83);
        let mut rng_b = ChaCha12Rng::seed_from_u64(83);
        rng_b.set_stream(7);
        let probs = [0.25, 0.25, 0.25, 0.25];
        let a = sample_perfect(&probs, 100, &mut rng_a);
        let b = sample_perfect(&probs, 100, &mut rng_b);
        assert_eq!(count(&a), count(&b));
        assert_ne!(a, b);
    }

    #[test]
    fn roulette_interval_rule() {
        // A fixed-value generator exercises the (d_{l-1}, d_l] rule.
        struct Fixed(f64);
        impl rand::RngCore for Fixed {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                // rand maps the top 53 bits to [0,1).
                ((self.0 * (1u64 << 53) as f64) as u64) << 11
            }
            fn fill_bytes(&mut self, dest: &mut [u8]) {
                for b in dest.iter_mut() {
                    *b = 0;
                }
            }
        }
        let probs = [0.25, 0.25, 0.25, 0.25];
        assert_eq!(sample_roulette(&probs, 1, &mut Fixed(0.3)), vec![1]);
        assert_eq!(sample_roulette(&probs, 1, &mut Fixed(0.25)), vec![0]);
        assert_eq!(sample_roulette(&probs, 1, &mut Fixed(0.9999)), vec![3]);
    }

    #[test]
    fn roulette_frequencies_sit_in_multinomial_bands() {
        let mut rng = ChaCha12Rng::seed_from_u64(84);
        let probs = [0.1, 0.2, 0.3, 0.4];
        let copies = 100_000;
        let seq = sample_roulette(&probs, copies, &mut rng);
        let counts = count(&seq);
        for (l, p) in probs.iter().enumerate() {
            let sigma = (copies as f64 * p * (1.0 - p)).sqrt();
            let diff = (counts[l] as f64 - copies as f64 * p).abs();
            assert!(diff <= 3.0 * sigma, "outcome {l}: deviation {diff} > 3 sigma {sigma}");
        }
    }

    #[test]
    fn uninformative_outcome_leaves_posterior_unchanged() {
        let grid = PosteriorGrid::uniform();
        let table = vec![[0.25, 0.25, 0.25, 0.25]; grid.len()];
        let updated = posterior_update(&grid, 2, &table).unwrap();
        for (a, b) in grid.probs().iter().zip(updated.probs()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn point_mass_likelihood_concentrates_the_posterior() {
        let grid = PosteriorGrid::uniform();
        let mut table = vec![[0.0, 0.0, 0.0, 0.0]; grid.len()];
        table[42] = [1.0, 0.0, 0.0, 0.0];
        let updated = posterior_update(&grid, 0, &table).unwrap();
        assert!(updated.probs()[42] > 0.999);
    }

    #[test]
    fn two_point_bayes_step() {
        let grid = PosteriorGrid::new(vec![0.0, 0.2], vec![0.5, 0.5]).unwrap();
        let table = vec![[0.8, 0.2, 0.0, 0.0], [0.2, 0.8, 0.0, 0.0]];
        let updated = posterior_update(&grid, 0, &table).unwrap();
        assert!((updated.probs()[0] - 0.8).abs() <= 1e-12);
        assert!((updated.probs()[1] - 0.2).abs() <= 1e-12);
    }

    #[test]
    fn posterior_mean_examples() {
        assert!((posterior_mean(&PosteriorGrid::uniform()) - 0.1).abs() <= 1e-12);

        let mut probs = vec![0.0; 100];
        let grid = PosteriorGrid::uniform();
        let idx = grid.values().iter().position(|v| (v - 0.1).abs() < 2e-3).unwrap();
        probs[idx] = 1.0;
        let point = PosteriorGrid::new(grid.values().to_vec(), probs).unwrap();
        assert!((posterior_mean(&point) - grid.values()[idx]).abs() <= 1e-12);

        let skew = PosteriorGrid::new(vec![0.0, 0.2], vec![0.25, 0.75]).unwrap();
        assert!((posterior_mean(&skew) - 0.15).abs() <= 1e-12);
    }

    #[test]
    fn batch_update_equals_sequential_updates() {
        let grid = PosteriorGrid::uniform();
        let mut rng = ChaCha12Rng::seed_from_u64(85);
        let table: Vec<[f64; 4]> = (0..grid.len())
            .map(|_| {
                let mut row = [0.0; 4];
                let mut total = 0.0;
                for r in row.iter_mut() {
                    *r = rng.random::<f64>() + 0.01;
                    total += *r;
                }
                for r in row.iter_mut() {
                    *r /= total;
                }
                row
            })
            .collect();
        let outcomes: Vec<usize> = (0..50).map(|_| (rng.random::<u32>() % 4) as usize).collect();

        let mut sequential = grid.clone();
        for &o in &outcomes {
            sequential = posterior_update(&sequential, o, &table).unwrap();
        }

        // Product-of-likelihoods route.
        let mut counts = [0usize; 4];
        for &o in &outcomes {
            counts[o] += 1;
        }
        let mut product: Vec<f64> = grid
            .probs()
            .iter()
            .zip(&table)
            .map(|(prior, row)| {
                let mut w = *prior;
                for (o, &c) in counts.iter().enumerate() {
                    w *= row[o].max(LIKELIHOOD_FLOOR).powi(c as i32);
                }
                w
            })
            .collect();
        let total: f64 = product.iter().sum();
        for w in product.iter_mut() {
            *w /= total;
        }

        for (a, b) in sequential.probs().iter().zip(&product) {
            assert!((a - b).abs() <= 1e-10, "batch vs sequential: {a} vs {b}");
        }
        assert!(sequential.normalization_error() <= 1e-10);
    }

    #[test]
    fn refreshed_povm_is_complete_deterministic_and_optimal() {
        let config = BayesConfig::new(Scheme::Feedback, SampleKind::Perfect, 1);
        let grid = TimeGrid::new(20.0, 25).unwrap();
        let controls = vec![ControlVector::zero(); grid.segments()];
        let g_hat = 0.12;

        let povm_a = refresh_povm(
            g_hat,
            config.scheme,
            config.channels,
            &controls,
            &config.params,
            &grid,
        )
        .unwrap();
        let povm_b = refresh_povm(
            g_hat,
            config.scheme,
            config.channels,
            &controls,
            &config.params,
            &grid,
        )
        .unwrap();
        for (a, b) in povm_a.elements().iter().zip(povm_b.elements()) {
            assert_eq!(a, b, "refresh must be deterministic");
        }

        let mut total = ComplexMatrix::zeros(4);
        for m in povm_a.elements() {
            total.add_scaled(m, C64::new(1.0, 0.0));
        }
        assert!(total.max_abs_diff(&ComplexMatrix::identity(4)) <= 1e-10);

        // The refreshed set saturates the quantum bound at the estimate.
        let rho0 = optimal_probe().density();
        let mode = config.mode();
        let traj = propagate_with_sensitivity(
            &rho0,
            &config.params.with_coupling(g_hat),
            &controls,
            mode,
            &grid,
        )
        .unwrap();
        let q = qfi(traj.final_state(), traj.final_sensitivity().unwrap()).unwrap();
        let c = cfi(traj.final_state(), traj.final_sensitivity().unwrap(), &povm_a).unwrap();
        assert!(c >= 0.999 * q, "refreshed CFI {c} below 0.999 x QFI {q}");
    }

    #[test]
    fn protocol_is_reproducible_and_concentrates_in_the_noiseless_limit() {
        // gamma = 0, free evolution, perfect samples: after all batches the
        // estimate must sit within one grid step of the truth.
        let mut config = BayesConfig::new(Scheme::None, SampleKind::Perfect, 7);
        config.params = SystemParams::symmetric(1.0, 0.1, 0.0).unwrap();
        config.batches = 5;
        config.grid = TimeGrid::new(20.0, 25).unwrap();
        let record = run_protocol(&config).unwrap();

        let step = 0.2 / 99.0;
        let last = *record.estimates.last().unwrap();
        assert!(
            (last - config.g_true).abs() <= step,
            "final estimate {last} not within one grid step of 0.1"
        );
        for batch in &record.batches {
            assert!(batch.posterior.normalization_error() <= 1e-10);
            assert!((0.0..=0.2).contains(&batch.estimate));
        }

        let again = run_protocol(&config).unwrap();
        assert_eq!(record.estimates, again.estimates, "seeded runs must be bit-identical");
    }

    #[test]
    fn likelihood_row_at_true_coupling_matches_sampling_distribution() {
        // Put the truth exactly on a grid point and compare the table row
        // against the distribution used to sample outcomes.
        let mut config = BayesConfig::new(Scheme::Feedback, SampleKind::Perfect, 3);
        let prior = PosteriorGrid::uniform();
        config.g_true = prior.values()[37];
        config.grid = TimeGrid::new(10.0, 10).unwrap();

        let controls = vec![ControlVector::zero(); config.grid.segments()];
        let rho0 = optimal_probe().density();
        let mode = config.mode();
        let povm = initial_povm();

        let row_state = propagate(
            &rho0,
            &config.params.with_coupling(prior.values()[37]),
            &controls,
            mode,
            &config.grid,
        )
        .unwrap();
        let truth_state = propagate(
            &rho0,
            &config.params.with_coupling(config.g_true),
            &controls,
            mode,
            &config.grid,
        )
        .unwrap();
        let row = outcome_probs(row_state.final_state(), &povm);
        let truth = outcome_probs(truth_state.final_state(), &povm);
        for (a, b) in row.iter().zip(&truth) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    fn count(seq: &[usize]) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for &s in seq {
            counts[s] += 1;
        }
        counts
    }
}
