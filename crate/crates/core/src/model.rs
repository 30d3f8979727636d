//! Physical operators and evolution generators of the ZZ-coupled pair.
//!
//! The module builds the free and control Hamiltonians, the local decay
//! channels, the detection-triggered feedback unitary, and the 16×16
//! generators for the three evolution modes: free dissipation, jump feedback
//! with perfect detection, and feedback with detector efficiency η.

use std::f64::consts::PI;

use crate::qcore::matrix::{kron, ComplexMatrix, C64};
use crate::qcore::superop::Superoperator;
use crate::{Error, Result};

/// Physical constants of the pair, in dimensionless units (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Local frequency of qubit 1.
    pub omega1: f64,
    /// Local frequency of qubit 2.
    pub omega2: f64,
    /// ZZ coupling strength; the quantity being estimated.
    pub g: f64,
    /// Decay rate of qubit 1.
    pub gamma1: f64,
    /// Decay rate of qubit 2.
    pub gamma2: f64,
}

impl SystemParams {
    pub fn new(omega1: f64, omega2: f64, g: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let all = [omega1, omega2, g, gamma1, gamma2];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("system parameters must be finite".into()));
        }
        if gamma1 < 0.0 || gamma2 < 0.0 {
            return Err(Error::InvalidConfig("decay rates must be nonnegative".into()));
        }
        Ok(Self { omega1, omega2, g, gamma1, gamma2 })
    }

    /// Equal frequencies and equal decay rates for both qubits.
    pub fn symmetric(omega: f64, g: f64, gamma: f64) -> Result<Self> {
        Self::new(omega, omega, g, gamma, gamma)
    }

    /// Same system with the coupling replaced; handy for grid sweeps.
    pub fn with_coupling(&self, g: f64) -> Self {
        Self { g, ..*self }
    }
}

/// Which decay channels get dressed by the feedback unitary.
///
/// The perfect-detection generator as written dresses both jump channels;
/// the finite-efficiency generator dresses only qubit 1 (the detector sits
/// on one qubit). Both variants are available everywhere so experiments can
/// pick either convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackChannels {
    Both,
    First,
}

/// Feedback strength and detection efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    /// Rotation angle of the feedback pulse; the design range is [0, π] and
    /// values up to 2π are accepted for periodicity scans.
    pub lambda: f64,
    /// Detector efficiency in [0, 1].
    pub eta: f64,
    pub channels: FeedbackChannels,
}

impl FeedbackConfig {
    pub fn new(lambda: f64, eta: f64, channels: FeedbackChannels) -> Result<Self> {
        if !lambda.is_finite() || !(0.0..=2.0 * PI).contains(&lambda) {
            return Err(Error::InvalidConfig(format!(
                "feedback strength {lambda} outside [0, 2pi]"
            )));
        }
        if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidConfig(format!(
                "detection efficiency {eta} outside [0, 1]"
            )));
        }
        Ok(Self { lambda, eta, channels })
    }

    /// Perfect detection, both channels dressed.
    pub fn perfect(lambda: f64) -> Result<Self> {
        Self::new(lambda, 1.0, FeedbackChannels::Both)
    }

    /// Finite detector efficiency, feedback on qubit 1 only.
    pub fn imperfect(lambda: f64, eta: f64) -> Result<Self> {
        Self::new(lambda, eta, FeedbackChannels::First)
    }

    pub fn with_channels(self, channels: FeedbackChannels) -> Self {
        Self { channels, ..self }
    }
}

/// Control amplitudes (x, y, z for qubit 1, then x, y, z for qubit 2).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlVector(pub [f64; 6]);

impl ControlVector {
    pub fn zero() -> Self {
        Self([0.0; 6])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|u| u.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, u| m.max(u.abs()))
    }

    /// Entrywise clamp to [-bound, bound].
    pub fn clamped(&self, bound: f64) -> Self {
        let mut out = *self;
        for u in out.0.iter_mut() {
            *u = u.clamp(-bound, bound);
        }
        out
    }
}

/// Evolution generator selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvolutionMode {
    /// Plain dissipative evolution, no detection.
    Free,
    /// Jump feedback with perfect detection; `eta` is treated as 1.
    Feedback(FeedbackConfig),
    /// Jump feedback with detector efficiency η.
    ImperfectFeedback(FeedbackConfig),
}

/// Single-qubit operator set.
#[derive(Debug, Clone)]
pub struct Paulis {
    pub x: ComplexMatrix,
    pub y: ComplexMatrix,
    pub z: ComplexMatrix,
    /// Lowering operator |1⟩⟨0| (excited → ground).
    pub minus: ComplexMatrix,
    /// Raising operator, σ₋ᴴ.
    pub plus: ComplexMatrix,
}

/// The 2×2 operator basis in the (excited, ground) ordering.
pub fn pauli_ops() -> Paulis {
    let mut x = ComplexMatrix::zeros(2);
    x[(0, 1)] = C64::new(1.0, 0.0);
    x[(1, 0)] = C64::new(1.0, 0.0);
    let mut y = ComplexMatrix::zeros(2);
    y[(0, 1)] = C64::new(0.0, -1.0);
    y[(1, 0)] = C64::new(0.0, 1.0);
    let z = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
    let mut minus = ComplexMatrix::zeros(2);
    minus[(1, 0)] = C64::new(1.0, 0.0);
    let plus = minus.dagger();
    Paulis { x, y, z, minus, plus }
}

/// σ acting on qubit `k` (1-based) of the pair.
fn embed(op: &ComplexMatrix, k: usize) -> ComplexMatrix {
    let id = ComplexMatrix::identity(2);
    match k {
        1 => kron(op, &id),
        2 => kron(&id, op),
        _ => panic!("qubit index must be 1 or 2"),
    }
}

/// Free Hamiltonian ω₁σz⁽¹⁾ + ω₂σz⁽²⁾ + gσz⁽¹⁾σz⁽²⁾.
pub fn build_h0(p: &SystemParams) -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[
        p.omega1 + p.omega2 + p.g,
        p.omega1 - p.omega2 - p.g,
        -p.omega1 + p.omega2 - p.g,
        -p.omega1 - p.omega2 + p.g,
    ])
}

/// Control Hamiltonian Σⱼ uⱼ⁽¹⁾σⱼ⊗I + Σⱼ uⱼ⁽²⁾I⊗σⱼ.
pub fn build_hc(u: &ControlVector) -> ComplexMatrix {
    let p = pauli_ops();
    let axes = [&p.x, &p.y, &p.z];
    let mut hc = ComplexMatrix::zeros(4);
    for (j, axis) in axes.iter().enumerate() {
        hc.add_scaled(&embed(axis, 1), C64::new(u.0[j], 0.0));
        hc.add_scaled(&embed(axis, 2), C64::new(u.0[3 + j], 0.0));
    }
    hc
}

/// Feedback pulse e^{iλσx}⊗I = (cos λ·I + i sin λ·σx)⊗I.
pub fn feedback_unitary(lambda: f64) -> ComplexMatrix {
    let p = pauli_ops();
    let mut u2 = ComplexMatrix::identity(2).scaled(C64::new(lambda.cos(), 0.0));
    u2.add_scaled(&p.x, C64::new(0.0, lambda.sin()));
    kron(&u2, &ComplexMatrix::identity(2))
}

/// First-order Kraus pair of the jump unraveling over a step `dt`.
///
/// Ω₁ = √(γ dt)·σ₋⁽ᵏ⁾ is the detected-jump operator for qubit `k`; Ω₀
/// carries the no-detection evolution with both decay channels' damping.
pub fn jump_measurement_ops(
    h: &ComplexMatrix,
    gamma: f64,
    k: usize,
    dt: f64,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if !(k == 1 || k == 2) {
        return Err(Error::InvalidConfig(format!("qubit index {k} must be 1 or 2")));
    }
    if !(dt > 0.0) || gamma < 0.0 {
        return Err(Error::InvalidConfig("need dt > 0 and gamma >= 0".into()));
    }
    let p = pauli_ops();
    let omega1 = embed(&p.minus, k).scaled(C64::new((gamma * dt).sqrt(), 0.0));
    let number = &embed(&p.plus.matmul(&p.minus), 1) + &embed(&p.plus.matmul(&p.minus), 2);
    let mut omega0 = ComplexMatrix::identity(4);
    omega0.add_scaled(h, C64::new(0.0, -dt));
    omega0.add_scaled(&number, C64::new(-0.5 * gamma * dt, 0.0));
    Ok((omega0, omega1))
}

/// −i[H, ·] as a superoperator (column stacking).
pub fn commutator_superop(h: &ComplexMatrix) -> Superoperator {
    let id = ComplexMatrix::identity(4);
    let mut m = kron(&id, h);
    m.add_scaled(&kron(&h.transpose(), &id), C64::new(-1.0, 0.0));
    Superoperator::new(m.scaled(C64::new(0.0, -1.0))).expect("assembled 16x16 generator")
}

/// Jump part c·ρ·cᴴ as a superoperator.
fn jump_superop(c: &ComplexMatrix) -> ComplexMatrix {
    kron(&c.conj(), c)
}

/// −½{cᴴc, ·} as a 16×16 matrix.
fn damping_superop(c: &ComplexMatrix) -> ComplexMatrix {
    let cc = c.dagger().matmul(c);
    let id = ComplexMatrix::identity(4);
    let mut m = kron(&id, &cc);
    m.add_scaled(&kron(&cc.transpose(), &id), C64::new(1.0, 0.0));
    m.scaled(C64::new(-0.5, 0.0))
}

/// Full dissipator 𝒟[c] = c·ρ·cᴴ − ½{cᴴc, ρ} with the jump dressed by `u`
/// (the damping part is unaffected because uᴴu = I).
fn dissipator(c: &ComplexMatrix, dress: Option<&ComplexMatrix>) -> ComplexMatrix {
    let jump = match dress {
        Some(u) => jump_superop(&u.matmul(c)),
        None => jump_superop(c),
    };
    let mut m = jump;
    m.add_scaled(&damping_superop(c), C64::new(1.0, 0.0));
    m
}

/// Assemble the 16×16 generator for the selected evolution mode, with total
/// Hamiltonian H₀(p) + Hc.
pub fn build_liouvillian(p: &SystemParams, hc: &ComplexMatrix, mode: EvolutionMode) -> Superoperator {
    let paulis = pauli_ops();
    let h = &build_h0(p) + hc;
    let mut gen = commutator_superop(&h).matrix().clone();
    let lowering = [embed(&paulis.minus, 1), embed(&paulis.minus, 2)];
    let gammas = [p.gamma1, p.gamma2];

    match mode {
        EvolutionMode::Free => {
            for (c, gamma) in lowering.iter().zip(gammas) {
                gen.add_scaled(&dissipator(c, None), C64::new(gamma, 0.0));
            }
        }
        EvolutionMode::Feedback(cfg) => {
            let u = feedback_unitary(cfg.lambda);
            for (idx, (c, gamma)) in lowering.iter().zip(gammas).enumerate() {
                let dressed = cfg.channels == FeedbackChannels::Both || idx == 0;
                let dress = if dressed { Some(&u) } else { None };
                gen.add_scaled(&dissipator(c, dress), C64::new(gamma, 0.0));
            }
        }
        EvolutionMode::ImperfectFeedback(cfg) => {
            let u = feedback_unitary(cfg.lambda);
            for (idx, (c, gamma)) in lowering.iter().zip(gammas).enumerate() {
                let dressed = cfg.channels == FeedbackChannels::Both || idx == 0;
                if dressed {
                    gen.add_scaled(&dissipator(c, Some(&u)), C64::new(cfg.eta * gamma, 0.0));
                    gen.add_scaled(&dissipator(c, None), C64::new((1.0 - cfg.eta) * gamma, 0.0));
                } else {
                    gen.add_scaled(&dissipator(c, None), C64::new(gamma, 0.0));
                }
            }
        }
    }

    Superoperator::new(gen).expect("assembled 16x16 generator")
}

/// ∂𝓛/∂g = −i[σz⊗σz, ·]; the sensitivity generator for the coupling.
pub fn coupling_superop() -> Superoperator {
    let p = pauli_ops();
    commutator_superop(&kron(&p.z, &p.z))
}

/// ∂𝓛/∂uⱼ⁽ᵏ⁾ = −i[σⱼ⁽ᵏ⁾, ·] for the six control channels, in the
/// [`ControlVector`] ordering.
pub fn control_superops() -> Vec<Superoperator> {
    let p = pauli_ops();
    let axes = [&p.x, &p.y, &p.z];
    let mut out = Vec::with_capacity(6);
    for k in [1, 2] {
        for axis in axes {
            out.push(commutator_superop(&embed(axis, k)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::expm::mat_exp;
    use crate::qcore::matrix::{commutator, vectorize};
    use crate::qcore::states::PureState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn pauli_algebra() {
        let p = pauli_ops();
        // sigma_+ sigma_- projects onto the excited level.
        let proj = p.plus.matmul(&p.minus);
        assert_eq!(proj, ComplexMatrix::from_real_diag(&[1.0, 0.0]));
        // [sigma_+, sigma_-] = sigma_z.
        assert!(commutator(&p.plus, &p.minus).max_abs_diff(&p.z) < 1e-15);
        // sigma_x = sigma_+ + sigma_-.
        assert!((&p.plus + &p.minus).max_abs_diff(&p.x) < 1e-15);
    }

    #[test]
    fn free_hamiltonian_diagonals() {
        let p = SystemParams::symmetric(1.0, 0.1, 0.0).unwrap();
        let want = ComplexMatrix::from_real_diag(&[2.1, -0.1, -0.1, -1.9]);
        assert!(build_h0(&p).max_abs_diff(&want) < 1e-15);

        let p = SystemParams::symmetric(0.0, 0.0, 0.0).unwrap();
        assert_eq!(build_h0(&p), ComplexMatrix::zeros(4));

        let p = SystemParams::symmetric(1.0, 0.2, 0.0).unwrap();
        let want = ComplexMatrix::from_real_diag(&[2.2, -0.2, -0.2, -1.8]);
        assert!(build_h0(&p).max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn control_hamiltonian_structure() {
        assert_eq!(build_hc(&ControlVector::zero()), ComplexMatrix::zeros(4));

        let p = pauli_ops();
        let u = ControlVector([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(build_hc(&u).max_abs_diff(&kron(&p.x, &ComplexMatrix::identity(2))) < 1e-15);

        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..10 {
            let u = ControlVector(std::array::from_fn(|_| rng.random::<f64>() - 0.5));
            assert!(build_hc(&u).hermiticity_error() < 1e-14);
        }
    }

    #[test]
    fn feedback_unitary_special_angles() {
        let id = ComplexMatrix::identity(4);
        assert!(feedback_unitary(0.0).max_abs_diff(&id) < 1e-15);

        let p = pauli_ops();
        let want = kron(&p.x, &ComplexMatrix::identity(2)).scaled(C64::new(0.0, 1.0));
        assert!(feedback_unitary(FRAC_PI_2).max_abs_diff(&want) < 1e-15);

        assert!(feedback_unitary(std::f64::consts::PI)
            .max_abs_diff(&id.scaled(C64::new(-1.0, 0.0)))
            < 1e-15);
    }

    #[test]
    fn feedback_unitary_is_unitary_for_random_angles() {
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let id = ComplexMatrix::identity(4);
        for _ in 0..50 {
            let lambda = rng.random::<f64>() * std::f64::consts::PI;
            let u = feedback_unitary(lambda);
            assert!(u.matmul(&u.dagger()).max_abs_diff(&id) <= 1e-12);
        }
    }

    #[test]
    fn jump_ops_vanish_without_decay() {
        let p = SystemParams::symmetric(1.0, 0.1, 0.0).unwrap();
        let h = build_h0(&p);
        let (omega0, omega1) = jump_measurement_ops(&h, 0.0, 1, 1e-3).unwrap();
        assert_eq!(omega1, ComplexMatrix::zeros(4));
        let mut want = ComplexMatrix::identity(4);
        want.add_scaled(&h, C64::new(0.0, -1e-3));
        assert!(omega0.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn jump_ops_complete_to_first_order() {
        let p = SystemParams::symmetric(1.0, 0.1, 0.05).unwrap();
        let h = build_h0(&p);
        let mut residuals = Vec::new();
        for dt in [1e-3, 1e-4] {
            let (omega0, _) = jump_measurement_ops(&h, 0.05, 1, dt).unwrap();
            let mut acc = omega0.dagger().matmul(&omega0);
            for k in [1, 2] {
                let (_, omega1) = jump_measurement_ops(&h, 0.05, k, dt).unwrap();
                acc.add_scaled(&omega1.dagger().matmul(&omega1), C64::new(1.0, 0.0));
            }
            let res = acc.max_abs_diff(&ComplexMatrix::identity(4));
            assert!(res <= 10.0 * dt * dt, "residual {res:.3e} at dt={dt}");
            residuals.push(res);
        }
        // Halving dt ten-fold here: the residual is quadratic in dt, so the
        // ratio of the two residuals must be 100 up to 20%.
        let ratio = residuals[0] / residuals[1];
        assert!((ratio - 100.0).abs() <= 20.0, "order-of-accuracy ratio {ratio}");
    }

    #[test]
    fn feedback_at_zero_angle_is_free() {
        let p = SystemParams::symmetric(1.0, 0.1, 0.05).unwrap();
        let hc = ComplexMatrix::zeros(4);
        let free = build_liouvillian(&p, &hc, EvolutionMode::Free);
        for channels in [FeedbackChannels::Both, FeedbackChannels::First] {
            let cfg = FeedbackConfig::new(0.0, 1.0, channels).unwrap();
            let fb = build_liouvillian(&p, &hc, EvolutionMode::Feedback(cfg));
            assert!(fb.max_abs_diff(&free) <= 1e-12);
        }
    }

    #[test]
    fn detection_efficiency_limits() {
        let p = SystemParams::symmetric(1.0, 0.1, 0.05).unwrap();
        let hc = ComplexMatrix::zeros(4);
        let free = build_liouvillian(&p, &hc, EvolutionMode::Free);
        for channels in [FeedbackChannels::Both, FeedbackChannels::First] {
            let lam = FRAC_PI_2;
            let fb = build_liouvillian(
                &p,
                &hc,
                EvolutionMode::Feedback(FeedbackConfig::new(lam, 1.0, channels).unwrap()),
            );
            let zero = build_liouvillian(
                &p,
                &hc,
                EvolutionMode::ImperfectFeedback(FeedbackConfig::new(lam, 0.0, channels).unwrap()),
            );
            let one = build_liouvillian(
                &p,
                &hc,
                EvolutionMode::ImperfectFeedback(FeedbackConfig::new(lam, 1.0, channels).unwrap()),
            );
            assert!(zero.max_abs_diff(&free) <= 1e-12, "eta=0 must reduce to free");
            assert!(one.max_abs_diff(&fb) <= 1e-12, "eta=1 must reduce to feedback");
        }
    }

    #[test]
    fn generator_linear_in_detection_efficiency() {
        let p = SystemParams::symmetric(1.0, 0.1, 0.05).unwrap();
        let hc = ComplexMatrix::zeros(4);
        let build = |eta: f64| {
            build_liouvillian(
                &p,
                &hc,
                EvolutionMode::ImperfectFeedback(FeedbackConfig::imperfect(1.1, eta).unwrap()),
            )
        };
        let l0 = build(0.0);
        let l1 = build(1.0);
        for eta in [0.25, 0.5, 0.9] {
            let mut mix = l1.scaled(eta);
            mix.add_scaled(&l0, 1.0 - eta);
            assert!(build(eta).max_abs_diff(&mix) <= 1e-12);
        }
    }

    #[test]
    fn generators_preserve_trace_and_hermiticity() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for _ in 0..20 {
            let p = SystemParams::new(
                2.0 * rng.random::<f64>(),
                2.0 * rng.random::<f64>(),
                0.5 * rng.random::<f64>(),
                0.2 * rng.random::<f64>(),
                0.2 * rng.random::<f64>(),
            )
            .unwrap();
            let u = ControlVector(std::array::from_fn(|_| 0.4 * (rng.random::<f64>() - 0.5)));
            let hc = build_hc(&u);
            let cfg = FeedbackConfig::new(
                rng.random::<f64>() * std::f64::consts::PI,
                rng.random::<f64>(),
                if rng.random::<bool>() { FeedbackChannels::Both } else { FeedbackChannels::First },
            )
            .unwrap();
            for mode in [
                EvolutionMode::Free,
                EvolutionMode::Feedback(cfg),
                EvolutionMode::ImperfectFeedback(cfg),
            ] {
                let gen = build_liouvillian(&p, &hc, mode);
                assert!(
                    gen.trace_preservation_error() <= 1e-12,
                    "trace leak {:.3e}",
                    gen.trace_preservation_error()
                );
                // One exponential step keeps Hermitian inputs Hermitian.
                let step = mat_exp(&gen.matrix().scaled(C64::new(0.1, 0.0)));
                let rho = PureState::plus_plus().density();
                let out = crate::qcore::matrix::unvectorize(
                    &step.mul_vec(&vectorize(rho.matrix())),
                )
                .unwrap();
                assert!(out.hermiticity_error() <= 1e-10);
            }
        }
    }

    #[test]
    fn unraveling_matches_generator_to_second_order() {
        // exp(L dt) against the Kraus step with dressed jumps on both
        // channels.
        let p = SystemParams::symmetric(1.0, 0.1, 0.05).unwrap();
        let cfg = FeedbackConfig::perfect(1.3).unwrap();
        let gen = build_liouvillian(&p, &ComplexMatrix::zeros(4), EvolutionMode::Feedback(cfg));
        let u = feedback_unitary(cfg.lambda);
        let h = build_h0(&p);
        let dt = 1e-4;
        let (omega0, _) = jump_measurement_ops(&h, 0.05, 1, dt).unwrap();

        let mut rng = ChaCha12Rng::seed_from_u64(34);
        for _ in 0..5 {
            let rho = crate::test_support::random_full_rank(&mut rng);
            let exact = mat_exp(&gen.matrix().scaled(C64::new(dt, 0.0)));
            let lhs = crate::qcore::matrix::unvectorize(
                &exact.mul_vec(&vectorize(rho.matrix())),
            )
            .unwrap();

            let mut rhs = omega0.matmul(rho.matrix()).matmul(&omega0.dagger());
            for k in [1, 2] {
                let (_, omega1) = jump_measurement_ops(&h, 0.05, k, dt).unwrap();
                let dressed = u.matmul(&omega1);
                rhs.add_scaled(
                    &dressed.matmul(rho.matrix()).matmul(&dressed.dagger()),
                    C64::new(1.0, 0.0),
                );
            }
            let err = lhs.max_abs_diff(&rhs);
            assert!(err <= 10.0 * dt * dt, "unraveling residual {err:.3e}");
        }
    }
}
