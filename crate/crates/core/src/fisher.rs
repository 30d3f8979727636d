//! Fisher-information machinery.
//!
//! The symmetric logarithmic derivative L solves ∂ρ = ½(Lρ + ρL); its
//! eigenbasis is an optimal projective measurement for single-parameter
//! estimation, with classical Fisher information meeting the quantum bound.

use crate::dynamics::Trajectory;
use crate::model::SystemParams;
use crate::qcore::eig::{hermitian_eig, HermitianEigen};
use crate::qcore::matrix::{ComplexMatrix, C64};
use crate::qcore::states::{DensityMatrix, PureState};
use crate::{Error, Result};

/// Eigenvalue-sum cutoff deciding which pairs belong to the state support.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
/// Probability floor below which a measurement outcome is treated as absent.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Symmetric logarithmic derivative together with its spectral decomposition.
#[derive(Debug, Clone)]
pub struct SldOperator {
    pub matrix: ComplexMatrix,
    pub basis_eigen: HermitianEigen,
}

/// A POVM: Hermitian PSD elements summing to the identity.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    elements: Vec<ComplexMatrix>,
}

impl MeasurementSet {
    pub const COMPLETENESS_TOL: f64 = 1e-10;
    pub const PSD_TOL: f64 = 1e-10;

    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidConfig("a POVM needs at least one element".into()));
        }
        let mut total = ComplexMatrix::zeros(4);
        for (idx, m) in elements.iter().enumerate() {
            if m.dim() != 4 {
                return Err(Error::DimensionMismatch { expected: 4, got: m.dim() });
            }
            let asym = m.hermiticity_error();
            if asym > Self::PSD_TOL {
                return Err(Error::NotHermitian(asym));
            }
            let eig = hermitian_eig(m)?;
            if eig.min_eigenvalue() < -Self::PSD_TOL {
                return Err(Error::InvalidConfig(format!(
                    "POVM element {idx} has eigenvalue {:.3e}",
                    eig.min_eigenvalue()
                )));
            }
            total.add_scaled(m, C64::new(1.0, 0.0));
        }
        let completeness = total.max_abs_diff(&ComplexMatrix::identity(4));
        if completeness > Self::COMPLETENESS_TOL {
            return Err(Error::InvalidConfig(format!(
                "POVM completeness defect {completeness:.3e}"
            )));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Eigenbasis projection of `drho` divided by the eigenvalue sums of `rho`.
///
/// Pairs with λᵢ+λⱼ at or below the support cutoff get a zero block (the SLD
/// is not unique off support; zero is the minimal-norm completion and leaves
/// the Fisher information unchanged).
pub fn compute_sld(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<SldOperator> {
    let (l, _) = sld_with_qfi(rho, drho)?;
    let basis_eigen = hermitian_eig(&l)?;
    Ok(SldOperator { matrix: l, basis_eigen })
}

/// Quantum Fisher information Σ 2|⟨λᵢ|∂ρ|λⱼ⟩|²/(λᵢ+λⱼ) over the support.
pub fn qfi(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<f64> {
    let (_, value) = sld_with_qfi(rho, drho)?;
    Ok(value)
}

fn sld_with_qfi(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    if drho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: drho.dim() });
    }
    let asym = drho.hermiticity_error();
    if asym > 1e-10 {
        return Err(Error::NotHermitian(asym));
    }
    let eig = hermitian_eig(rho.matrix())?;
    sld_from_eigen(&eig, drho)
}

fn sld_from_eigen(eig: &HermitianEigen, drho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let v = &eig.eigenvectors;
    // B = V^H (drho) V.
    let b = v.dagger().matmul(drho).matmul(v);

    let mut on_support = false;
    let mut l_eig = ComplexMatrix::zeros(4);
    let mut fisher = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let denom = eig.eigenvalues[i] + eig.eigenvalues[j];
            if denom > SUPPORT_CUTOFF {
                on_support = true;
                l_eig[(i, j)] = 2.0 * b[(i, j)] / denom;
                fisher += 2.0 * b[(i, j)].norm_sqr() / denom;
            }
        }
    }
    if !on_support {
        return Err(Error::DegenerateSupport);
    }
    let l = v.matmul(&l_eig).matmul(&v.dagger()).hermitize();
    Ok((l, fisher))
}

/// Classical Fisher information Σ (dp)²/p of the outcome distribution.
pub fn cfi(rho: &DensityMatrix, drho: &ComplexMatrix, povm: &MeasurementSet) -> Result<f64> {
    let mut total = 0.0;
    for (index, m) in povm.elements().iter().enumerate() {
        let p = rho.matrix().matmul(m).trace().re;
        let dp = drho.matmul(m).trace().re;
        if p > PROBABILITY_FLOOR {
            total += dp * dp / p;
        } else if dp.abs() > 1e-9 {
            return Err(Error::SingularOutcome { index, dp });
        }
    }
    Ok(total)
}

/// Rank-1 projectors onto the SLD eigenvectors.
pub fn optimal_povm_from_sld(sld: &SldOperator) -> MeasurementSet {
    let v = &sld.basis_eigen.eigenvectors;
    let elements: Vec<ComplexMatrix> = (0..4)
        .map(|k| ComplexMatrix::from_fn(4, |i, j| v[(i, k)] * v[(j, k)].conj()))
        .collect();
    MeasurementSet::new(elements).expect("orthonormal projectors form a POVM")
}

/// Noiseless bound 4T²(1 − ⟨σz⊗σz⟩²) for a pure probe under free evolution.
pub fn pure_state_qfi(psi0: &PureState, _params: &SystemParams, t_final: f64) -> f64 {
    let zz = psi0.zz_expectation();
    4.0 * t_final * t_final * (1.0 - zz * zz)
}

/// The probe maximizing the noiseless bound: |++⟩.
pub fn optimal_probe() -> PureState {
    PureState::plus_plus()
}

/// QFI at every boundary of a sensitivity-carrying trajectory.
pub fn qfi_curve(traj: &Trajectory) -> Result<Vec<f64>> {
    let sens = traj
        .sensitivities
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("trajectory carries no sensitivities".into()))?;
    traj.states
        .iter()
        .zip(sens)
        .map(|(rho, drho)| qfi(rho, drho))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pauli_ops;
    use crate::qcore::matrix::kron;
    use crate::test_support::{random_full_rank, random_povm, random_traceless_hermitian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn qubit_block_state(p: f64) -> DensityMatrix {
        DensityMatrix::new(ComplexMatrix::from_real_diag(&[p, 1.0 - p, 0.0, 0.0])).unwrap()
    }

    #[test]
    fn diagonal_sld_matches_ratio_formula() {
        let rho = qubit_block_state(0.25);
        let drho = ComplexMatrix::from_real_diag(&[1.0, -1.0, 0.0, 0.0]);
        let sld = compute_sld(&rho, &drho).unwrap();
        let want = ComplexMatrix::from_real_diag(&[4.0, -4.0 / 3.0, 0.0, 0.0]);
        assert!(sld.matrix.max_abs_diff(&want) <= 1e-10);
    }

    #[test]
    fn zero_perturbation_gives_zero_sld_and_qfi() {
        let rho = qubit_block_state(0.25);
        let drho = ComplexMatrix::zeros(4);
        let sld = compute_sld(&rho, &drho).unwrap();
        assert!(sld.matrix.max_abs() <= 1e-14);
        assert!(qfi(&rho, &drho).unwrap() <= 1e-14);
    }

    #[test]
    fn binomial_block_qfi() {
        let p = 0.25;
        let rho = qubit_block_state(p);
        let drho = ComplexMatrix::from_real_diag(&[1.0, -1.0, 0.0, 0.0]);
        let want = 1.0 / (p * (1.0 - p));
        assert!((qfi(&rho, &drho).unwrap() - want).abs() <= 1e-10);
        assert!((want - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sld_defining_relation_on_full_rank_states() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        for _ in 0..20 {
            let rho = random_full_rank(&mut rng);
            let drho = random_traceless_hermitian(&mut rng);
            let sld = compute_sld(&rho, &drho).unwrap();
            // residual of drho = (L rho + rho L)/2
            let mut sym = sld.matrix.matmul(rho.matrix());
            sym.add_scaled(&rho.matrix().matmul(&sld.matrix), C64::new(1.0, 0.0));
            let residual = drho.max_abs_diff(&sym.scaled(C64::new(0.5, 0.0)));
            assert!(residual <= 1e-8, "defining-relation residual {residual:.3e}");
        }
    }

    #[test]
    fn qfi_equals_trace_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(62);
        for _ in 0..20 {
            let rho = random_full_rank(&mut rng);
            let drho = random_traceless_hermitian(&mut rng);
            let sld = compute_sld(&rho, &drho).unwrap();
            let via_sum = qfi(&rho, &drho).unwrap();
            let via_trace = rho
                .matrix()
                .matmul(&sld.matrix.matmul(&sld.matrix))
                .trace()
                .re;
            assert!((via_sum - via_trace).abs() <= 1e-8 * (1.0 + via_sum));
        }
    }

    #[test]
    fn vacuous_measurement_carries_no_information() {
        let rho = DensityMatrix::maximally_mixed();
        let drho = ComplexMatrix::from_real_diag(&[0.5, -0.5, 0.0, 0.0]);
        let povm = MeasurementSet::new(vec![ComplexMatrix::identity(4)]).unwrap();
        assert!(cfi(&rho, &drho, &povm).unwrap().abs() <= 1e-14);
    }

    #[test]
    fn cfi_never_exceeds_qfi() {
        let mut rng = ChaCha12Rng::seed_from_u64(63);
        for _ in 0..100 {
            let rho = random_full_rank(&mut rng);
            let drho = random_traceless_hermitian(&mut rng);
            let povm = random_povm(3 + (rng.random::<u32>() % 3) as usize, &mut rng);
            let c = cfi(&rho, &drho, &povm).unwrap();
            let q = qfi(&rho, &drho).unwrap();
            assert!(c <= q + 1e-8, "CFI {c} exceeds QFI {q}");
        }
    }

    #[test]
    fn sld_projectors_saturate_the_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(64);
        for _ in 0..20 {
            let rho = random_full_rank(&mut rng);
            let drho = random_traceless_hermitian(&mut rng);
            let sld = compute_sld(&rho, &drho).unwrap();
            let povm = optimal_povm_from_sld(&sld);
            let c = cfi(&rho, &drho, &povm).unwrap();
            let q = qfi(&rho, &drho).unwrap();
            assert!(c >= 0.999 * q, "optimal CFI {c} below 0.999 x QFI {q}");
            assert!((c - q).abs() <= 1e-6 * q.max(1.0));
        }
    }

    #[test]
    fn sld_povm_from_sigma_z_completes() {
        let p = pauli_ops();
        let l = kron(&p.z, &ComplexMatrix::identity(2));
        let sld = SldOperator { basis_eigen: hermitian_eig(&l).unwrap(), matrix: l };
        let povm = optimal_povm_from_sld(&sld);
        let mut total = ComplexMatrix::zeros(4);
        for m in povm.elements() {
            total.add_scaled(m, C64::new(1.0, 0.0));
        }
        assert!(total.max_abs_diff(&ComplexMatrix::identity(4)) <= 1e-12);
    }

    #[test]
    fn zero_sld_still_yields_a_basis_with_zero_cfi() {
        let sld = compute_sld(&DensityMatrix::maximally_mixed(), &ComplexMatrix::zeros(4)).unwrap();
        let povm = optimal_povm_from_sld(&sld);
        assert_eq!(povm.len(), 4);
        let c = cfi(&DensityMatrix::maximally_mixed(), &ComplexMatrix::zeros(4), &povm).unwrap();
        assert!(c.abs() <= 1e-14);
    }

    #[test]
    fn noiseless_bound_values() {
        let params = SystemParams::symmetric(1.0, 0.1, 0.0).unwrap();
        let probe = optimal_probe();
        assert!((pure_state_qfi(&probe, &params, 80.0) - 25600.0).abs() < 1e-9);

        let excited = PureState::new([
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ])
        .unwrap();
        assert!(pure_state_qfi(&excited, &params, 80.0).abs() < 1e-9);
        assert!(pure_state_qfi(&PureState::bell_phi_plus(), &params, 80.0).abs() < 1e-9);
    }

    #[test]
    fn optimal_probe_maximizes_for_all_horizons() {
        let params = SystemParams::symmetric(1.0, 0.1, 0.0).unwrap();
        let probe = optimal_probe();
        for amp in probe.amplitudes() {
            assert!((amp - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        assert!(probe.zz_expectation().abs() < 1e-15);
        for t in [1.0, 10.0, 80.0] {
            let got = pure_state_qfi(&probe, &params, t);
            assert!((got - 4.0 * t * t).abs() <= 1e-9 * (1.0 + got));
        }
    }

    #[test]
    fn singular_outcome_is_flagged() {
        // rho has no weight on |11>, but drho does: projecting there is
        // ill-posed.
        let rho = qubit_block_state(0.5);
        let mut drho = ComplexMatrix::zeros(4);
        drho[(3, 3)] = C64::new(1.0, 0.0);
        drho[(0, 0)] = C64::new(-1.0, 0.0);
        let mut proj = ComplexMatrix::zeros(4);
        proj[(3, 3)] = C64::new(1.0, 0.0);
        let mut rest = ComplexMatrix::identity(4);
        rest[(3, 3)] = C64::new(0.0, 0.0);
        let povm = MeasurementSet::new(vec![proj, rest]).unwrap();
        assert!(matches!(
            cfi(&rho, &drho, &povm),
            Err(Error::SingularOutcome { index: 0, .. })
        ));
    }

    #[test]
    fn degenerate_support_is_flagged() {
        // A unit-trace state always has support; the branch only fires when
        // every eigenvalue pair sits below the cutoff, as for a numerically
        // zero matrix.
        let eig = hermitian_eig(&ComplexMatrix::zeros(4)).unwrap();
        let drho = ComplexMatrix::from_real_diag(&[1.0, -1.0, 0.0, 0.0]);
        assert!(matches!(sld_from_eigen(&eig, &drho), Err(Error::DegenerateSupport)));
    }
}
