//! Second-law checks between states, work bounds, work-extraction search and
//! sampled thermal operations with a NATS bath.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::payoff::{payoff_operator, PayoffFunction};
use super::renyi::{classical_renyi, f1_decomposition, quantum_renyi, temperature, RenyiVariant};
use super::unitary::CommutantProjector;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::nats::{build_nats, log_partition};
use crate::qops::{partial_trace_subsystems, trace_distance, ChargeFamily, DensityMatrix, HermitianOperator};
use crate::random::substream;

/// Free-energy decrease tolerated as rounding.
pub const MONOTONE_TOL: f64 = 1e-9;
/// `||[W, sigma]||` below which the target counts as payoff-diagonal.
pub const DIAGONAL_TOL: f64 = 1e-9;

/// `F(rho) - F(sigma)`, treating equal infinities as equal.
fn margin(f_rho: f64, f_sigma: f64) -> f64 {
    if f_rho == f_sigma {
        0.0
    } else {
        f_rho - f_sigma
    }
}

fn violated(m: f64, f_rho: f64) -> bool {
    m < -MONOTONE_TOL * f_rho.abs().max(1.0)
}

/// A quantum monotone that increases from `rho` to `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumViolation {
    pub variant: RenyiVariant,
    pub alpha: f64,
    #[serde(with = "crate::io::float")]
    pub margin: f64,
}

/// Outcome of comparing every free energy of `rho` and `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionVerdict {
    /// No monotone increases; necessary for `rho -> sigma` under free operations.
    pub allowed_necessary: bool,
    /// Orders at which some monotone increases, ascending.
    pub violated_alphas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Classical `F_alpha(rho) - F_alpha(sigma)`.
    #[serde(with = "crate::io::float_vec")]
    pub margins: Vec<f64>,
    #[serde(with = "crate::io::float_opt_vec")]
    pub petz_margins: Vec<Option<f64>>,
    #[serde(with = "crate::io::float_opt_vec")]
    pub sandwiched_margins: Vec<Option<f64>>,
    pub quantum_violations: Vec<QuantumViolation>,
    /// `||[W, sigma]||`.
    pub target_coherence: f64,
    /// Every monotone passes and `sigma` is payoff-diagonal; the transition is
    /// then claimed reachable with a reference frame. No protocol is built.
    pub sufficient_per_reference_frame_claim: bool,
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("alpha grid must start at 0".into()));
    }
    if alphas.windows(2).any(|w| !(w[1] > w[0])) || alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument("alpha grid must be finite and strictly increasing".into()));
    }
    if *alphas.last().expect("non-empty") < 2.0 {
        return Err(Error::InvalidArgument("alpha grid must reach at least 2".into()));
    }
    Ok(())
}

struct Setup {
    t: f64,
    log_z: f64,
    gamma: DensityMatrix,
    w: PayoffFunction,
}

fn setup(rho: &DensityMatrix, sigma: &DensityMatrix, family: &ChargeFamily, mu: &[f64]) -> Result<Setup> {
    for s in [rho, sigma] {
        if s.dim() != family.site_dim() {
            return Err(Error::DimensionMismatch {
                expected: family.site_dim(),
                found: s.dim(),
            });
        }
    }
    Ok(Setup {
        t: temperature(mu)?,
        log_z: log_partition(family, mu)?,
        gamma: build_nats(family, mu)?,
        w: payoff_operator(family, mu)?,
    })
}

impl Setup {
    fn free(&self, d: f64) -> f64 {
        self.t * d - self.t * self.log_z
    }
}

/// Checks every classical and quantum Rényi free energy for `rho -> sigma`.
pub fn second_laws_check(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    family: &ChargeFamily,
    mu: &[f64],
    alphas: &[f64],
) -> Result<TransitionVerdict> {
    check_grid(alphas)?;
    let s = setup(rho, sigma, family, mu)?;
    let mut violated_alphas = Vec::new();
    let mut margins = Vec::with_capacity(alphas.len());
    let mut petz_margins = Vec::with_capacity(alphas.len());
    let mut sandwiched_margins = Vec::with_capacity(alphas.len());
    let mut quantum_violations = Vec::new();
    for &a in alphas {
        let fr = s.free(classical_renyi(rho, &s.gamma, &s.w, a)?);
        let fs = s.free(classical_renyi(sigma, &s.gamma, &s.w, a)?);
        let m = margin(fr, fs);
        margins.push(m);
        let mut bad = violated(m, fr);
        for variant in [RenyiVariant::Petz, RenyiVariant::Sandwiched] {
            let slot = if variant.valid_at(a) {
                let qr = s.free(quantum_renyi(rho, &s.gamma, a, variant)?);
                let qs = s.free(quantum_renyi(sigma, &s.gamma, a, variant)?);
                let qm = margin(qr, qs);
                if violated(qm, qr) {
                    quantum_violations.push(QuantumViolation {
                        variant,
                        alpha: a,
                        margin: qm,
                    });
                    bad = true;
                }
                Some(qm)
            } else {
                None
            };
            match variant {
                RenyiVariant::Petz => petz_margins.push(slot),
                RenyiVariant::Sandwiched => sandwiched_margins.push(slot),
            }
        }
        if bad {
            violated_alphas.push(a);
        }
    }
    let target_coherence = linalg::op_norm(&linalg::commutator(s.w.operator().matrix(), sigma.matrix()));
    let allowed_necessary = violated_alphas.is_empty();
    Ok(TransitionVerdict {
        allowed_necessary,
        violated_alphas,
        alphas: alphas.to_vec(),
        margins,
        petz_margins,
        sandwiched_margins,
        quantum_violations,
        target_coherence,
        sufficient_per_reference_frame_claim: allowed_necessary && target_coherence <= DIAGONAL_TOL,
    })
}

/// Classical `F_alpha(rho) - F_alpha(sigma)` per order: the work the
/// transition can release at each order.
pub fn extractable_work_bound(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    family: &ChargeFamily,
    mu: &[f64],
    alphas: &[f64],
) -> Result<Vec<f64>> {
    let s = setup(rho, sigma, family, mu)?;
    alphas
        .iter()
        .map(|&a| {
            let fr = s.free(classical_renyi(rho, &s.gamma, &s.w, a)?);
            let fs = s.free(classical_renyi(sigma, &s.gamma, &s.w, a)?);
            Ok(margin(fr, fs))
        })
        .collect()
}

/// `F_1(rho) - F_1(sigma)` for the quantum relative entropy.
pub fn average_work_bound(rho: &DensityMatrix, sigma: &DensityMatrix, family: &ChargeFamily, mu: &[f64]) -> Result<f64> {
    Ok(f1_decomposition(rho, family, mu)?.value - f1_decomposition(sigma, family, mu)?.value)
}

/// Best payoff release found by [`work_extraction_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkSearchResult {
    pub trials: usize,
    pub seed: u64,
    /// `max(0, best_random_work)`: the identity is always free.
    pub best_work: f64,
    /// Largest `Tr(rho W) - Tr(U rho U^dagger W)` over the random trials.
    pub best_random_work: f64,
    /// Trial attaining `best_random_work`.
    pub best_trial: Option<usize>,
    /// Real dimension of the commutant the unitaries are drawn from.
    pub commutant_dim: usize,
}

/// Searches random unitaries commuting with `totals` (trial `i` from
/// substream `i` of `seed`) for the largest decrease of `<W>`, the payoff a
/// battery would gain. An empty `totals` list imposes no constraint.
pub fn work_extraction_search(
    rho: &DensityMatrix,
    w: &PayoffFunction,
    totals: &[HermitianOperator],
    trials: usize,
    seed: u64,
) -> Result<WorkSearchResult> {
    if w.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: rho.dim(),
        });
    }
    let proj = CommutantProjector::new(totals, rho.dim())?;
    let before = rho.expectation(w.operator());
    let works: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let u = proj.sample(&mut substream(seed, i as u64));
            before - rho.conjugate_by(&u).expectation(w.operator())
        })
        .collect();
    let mut best_trial = None;
    let mut best_random_work = f64::NEG_INFINITY;
    for (i, &x) in works.iter().enumerate() {
        if x > best_random_work {
            best_random_work = x;
            best_trial = Some(i);
        }
    }
    Ok(WorkSearchResult {
        trials,
        seed,
        best_work: best_random_work.max(0.0),
        best_random_work,
        best_trial,
        commutant_dim: proj.commutant_dim(),
    })
}

/// `rho -> Tr_A[U (rho ⊗ gamma_A) U^dagger]` for a unitary `U` commuting
/// with the system-plus-ancilla totals.
#[derive(Debug, Clone)]
pub struct NatoChannel {
    pub unitary: CMatrix,
    pub ancilla: DensityMatrix,
    pub system_dim: usize,
}

impl NatoChannel {
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.system_dim {
            return Err(Error::DimensionMismatch {
                expected: self.system_dim,
                found: rho.dim(),
            });
        }
        let joint = rho.tensor(&self.ancilla).conjugate_by(&self.unitary);
        partial_trace_subsystems(&joint, &[self.system_dim, self.ancilla.dim()], &[0])
    }
}

/// Draws channels with one system site and `ancilla_copies` NATS copies.
#[derive(Debug, Clone)]
pub struct NatoSampler {
    projector: CommutantProjector,
    ancilla: DensityMatrix,
    system_dim: usize,
}

impl NatoSampler {
    pub fn new(family: &ChargeFamily, mu: &[f64], ancilla_copies: usize) -> Result<Self> {
        if ancilla_copies == 0 {
            return Err(Error::InvalidArgument("at least one ancilla copy is needed".into()));
        }
        let gamma = build_nats(family, mu)?;
        let ancilla = gamma.tensor_power(ancilla_copies)?;
        let totals = family.totals(ancilla_copies + 1)?;
        let dim = family.site_dim() * ancilla.dim();
        Ok(Self {
            projector: CommutantProjector::new(totals.charges(), dim)?,
            ancilla,
            system_dim: family.site_dim(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NatoChannel {
        NatoChannel {
            unitary: self.projector.sample(rng),
            ancilla: self.ancilla.clone(),
            system_dim: self.system_dim,
        }
    }
}

/// Largest `||Lambda(gamma) - gamma||_1` over `channel_samples` random
/// channels with one ancilla copy (channel `i` from substream `i` of `seed`).
pub fn nats_preservation_check(family: &ChargeFamily, mu: &[f64], channel_samples: usize, seed: u64) -> Result<f64> {
    let sampler = NatoSampler::new(family, mu, 1)?;
    let gamma = build_nats(family, mu)?;
    let devs = (0..channel_samples)
        .into_par_iter()
        .map(|i| {
            let ch = sampler.sample(&mut substream(seed, i as u64));
            trace_distance(&ch.apply(&gamma)?, &gamma)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_density;
    use crate::testing::spin_family;

    fn qubit_energy() -> ChargeFamily {
        ChargeFamily::unlabeled(vec![HermitianOperator::from_real_diagonal(&[0.0, 1.0])]).unwrap()
    }

    fn grid() -> Vec<f64> {
        vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0]
    }

    #[test]
    fn nats_to_itself_is_allowed_with_zero_margins() {
        let fam = spin_family();
        let mu = [0.8, 0.2, -0.3];
        let g = build_nats(&fam, &mu).unwrap();
        let v = second_laws_check(&g, &g, &fam, &mu, &grid()).unwrap();
        assert!(v.allowed_necessary);
        assert!(v.margins.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn excited_to_thermal_allowed_reverse_forbidden() {
        let fam = qubit_energy();
        let mu = [1.0];
        let excited = DensityMatrix::basis_state(2, 1).unwrap();
        let g = build_nats(&fam, &mu).unwrap();
        let fwd = second_laws_check(&excited, &g, &fam, &mu, &grid()).unwrap();
        assert!(fwd.allowed_necessary);
        assert!(fwd.sufficient_per_reference_frame_claim);
        let back = second_laws_check(&g, &excited, &fam, &mu, &grid()).unwrap();
        assert!(!back.allowed_necessary);
        assert!(!back.violated_alphas.is_empty());
    }

    #[test]
    fn grid_is_validated() {
        let fam = qubit_energy();
        let g = build_nats(&fam, &[1.0]).unwrap();
        for bad in [vec![0.5, 2.0], vec![0.0, 1.0], vec![0.0, 2.0, 1.0]] {
            assert!(matches!(
                second_laws_check(&g, &g, &fam, &[1.0], &bad),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn coherent_target_gets_no_sufficiency_claim() {
        let fam = qubit_energy();
        let plus = DensityMatrix::pure(&crate::linalg::CVector::from_vec(vec![
            linalg::c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            linalg::c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ]))
        .unwrap();
        let v = second_laws_check(&plus, &plus, &fam, &[1.0], &grid()).unwrap();
        assert!(v.allowed_necessary);
        assert!(!v.sufficient_per_reference_frame_claim);
    }

    #[test]
    fn excited_qubit_bound_matches_decomposition() {
        let fam = qubit_energy();
        let mu = [1.5];
        let excited = DensityMatrix::basis_state(2, 1).unwrap();
        let g = build_nats(&fam, &mu).unwrap();
        let bound = extractable_work_bound(&excited, &g, &fam, &mu, &grid()).unwrap();
        assert_eq!(bound.len(), grid().len());
        let direct = f1_decomposition(&excited, &fam, &mu).unwrap().value - f1_decomposition(&g, &fam, &mu).unwrap().value;
        assert!((bound[2] - direct).abs() < 1e-12);
        assert!((average_work_bound(&excited, &g, &fam, &mu).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn jx_jz_payoffs_compensate() {
        // A swap moves J_z payoff out of the system and J_x payoff into it;
        // the battery gains exactly what the system loses.
        let fam = spin_family();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let up = DensityMatrix::basis_state(2, 0).unwrap();
        let plus = DensityMatrix::pure(&crate::linalg::CVector::from_vec(vec![linalg::c(s, 0.0), linalg::c(s, 0.0)])).unwrap();
        let mut swap = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[(i, j)] = linalg::c(1.0, 0.0);
        }
        let totals = fam.totals(2).unwrap();
        assert!(crate::resource::is_free_unitary(&swap, totals.charges(), 1e-12).unwrap().ok);
        let joint = up.tensor(&plus).conjugate_by(&swap);
        let sys = partial_trace_subsystems(&joint, &[2, 2], &[0]).unwrap();
        let bat = partial_trace_subsystems(&joint, &[2, 2], &[1]).unwrap();
        for (mx, mz) in [(1.0, 1.0), (0.3, 1.1)] {
            let w = payoff_operator(&fam, &[mx, 0.0, mz]).unwrap();
            let system_gain = crate::resource::average_work(&up, &sys, &w).unwrap();
            let battery_gain = crate::resource::average_work(&plus, &bat, &w).unwrap();
            assert!((system_gain - 0.5 * (mx - mz)).abs() < 1e-12);
            assert!((system_gain + battery_gain).abs() < 1e-12);
        }
    }

    #[test]
    fn work_bounds_vanish_for_identical_states() {
        let fam = spin_family();
        let mu = [1.0, 0.0, 0.4];
        let rho = random_density(2, &mut substream(1, 0));
        assert!(average_work_bound(&rho, &rho, &fam, &mu).unwrap().abs() < 1e-14);
        assert!(extractable_work_bound(&rho, &rho, &fam, &mu, &grid())
            .unwrap()
            .iter()
            .all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn thermal_state_releases_no_work() {
        let fam = qubit_energy();
        let mu = [1.0];
        let g = build_nats(&fam, &mu).unwrap().tensor_power(3).unwrap();
        let totals = fam.totals(3).unwrap();
        let w = payoff_operator(&totals, &mu).unwrap();
        let r = work_extraction_search(&g, &w, &[], 200, 3).unwrap();
        assert!(r.best_random_work <= 1e-9, "{}", r.best_random_work);
        assert_eq!(r.best_work, 0.0_f64.max(r.best_random_work));
    }

    #[test]
    fn inverted_qubit_releases_work() {
        let sz = ChargeFamily::unlabeled(vec![HermitianOperator::from_real_diagonal(&[0.5, -0.5])]).unwrap();
        let w = payoff_operator(&sz, &[1.0]).unwrap();
        let rho = DensityMatrix::from_populations(&[0.8, 0.2]).unwrap();
        let r = work_extraction_search(&rho, &w, &[], 100, 5).unwrap();
        assert!(r.best_work > 0.0);
        assert!(r.best_work <= 0.6 + 1e-12);
    }

    #[test]
    fn scalar_commutant_releases_nothing() {
        let sz = ChargeFamily::unlabeled(vec![HermitianOperator::from_real_diagonal(&[0.5, -0.5])]).unwrap();
        let w = payoff_operator(&sz, &[1.0]).unwrap();
        let rho = DensityMatrix::from_populations(&[0.8, 0.2]).unwrap();
        let sf = spin_family();
        let r = work_extraction_search(&rho, &w, sf.charges(), 20, 5).unwrap();
        assert_eq!(r.commutant_dim, 1);
        assert!(r.best_random_work.abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic() {
        let sz = ChargeFamily::unlabeled(vec![HermitianOperator::from_real_diagonal(&[0.5, -0.5])]).unwrap();
        let w = payoff_operator(&sz, &[1.0]).unwrap();
        let rho = DensityMatrix::from_populations(&[0.8, 0.2]).unwrap();
        let a = work_extraction_search(&rho, &w, &[], 50, 9).unwrap();
        let b = work_extraction_search(&rho, &w, &[], 50, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nato_channels_fix_the_nats() {
        let fam = spin_family();
        let mu = [0.5, -0.7, 0.3];
        assert!(nats_preservation_check(&fam, &mu, 50, 1).unwrap() <= 1e-8);
    }

    #[test]
    fn identity_channel_is_free() {
        let fam = qubit_energy();
        let g = build_nats(&fam, &[1.0]).unwrap();
        let ch = NatoChannel {
            unitary: linalg::identity(4),
            ancilla: g.clone(),
            system_dim: 2,
        };
        let rho = random_density(2, &mut substream(2, 0));
        assert!(trace_distance(&ch.apply(&rho).unwrap(), &rho).unwrap() < 1e-14);
    }

    #[test]
    fn nato_channels_do_not_raise_free_energies() {
        let fam = spin_family();
        let mu = [0.9, 0.2, -0.5];
        let sampler = NatoSampler::new(&fam, &mu, 1).unwrap();
        let mut rng = substream(11, 0);
        for _ in 0..20 {
            let rho = random_density(2, &mut rng);
            let out = sampler.sample(&mut rng).apply(&rho).unwrap();
            let v = second_laws_check(&rho, &out, &fam, &mu, &grid()).unwrap();
            assert!(v.allowed_necessary, "{:?}", v.violated_alphas);
        }
    }
}
