//! Rényi divergences from the NATS and the free energies built on them.

use serde::{Deserialize, Serialize};

use super::payoff::{payoff_operator, PayoffFunction};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Eigh};
use crate::nats::{build_nats, log_partition};
use crate::qops::{relative_entropy, von_neumann_entropy, ChargeFamily, DensityMatrix, NULL_EIGENVALUE, SUPPORT_TOL};

/// Quantum Rényi divergence family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenyiVariant {
    /// `log Tr(rho^a gamma^(1-a)) / (a-1)`, monotone for `a` in `[0, 2]`.
    Petz,
    /// `log Tr[(gamma^s rho gamma^s)^a] / (a-1)` with `s = (1-a)/2a`,
    /// monotone for `a >= 1/2`.
    Sandwiched,
}

impl RenyiVariant {
    pub fn name(self) -> &'static str {
        match self {
            RenyiVariant::Petz => "petz",
            RenyiVariant::Sandwiched => "sandwiched",
        }
    }

    /// Whether the divergence obeys data processing at `alpha`.
    pub fn valid_at(self, alpha: f64) -> bool {
        match self {
            RenyiVariant::Petz => (0.0..=2.0).contains(&alpha),
            RenyiVariant::Sandwiched => alpha >= 0.5,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    Ok(())
}

fn clip(x: f64) -> f64 {
    if x <= NULL_EIGENVALUE {
        0.0
    } else {
        x
    }
}

/// Weight of `rho` on the null space of `g`.
fn outside_support(rho: &CMatrix, g: &Eigh) -> f64 {
    let mut w = 0.0;
    for (k, &lam) in g.values.iter().enumerate() {
        if lam <= NULL_EIGENVALUE {
            let v = g.vectors.column(k);
            w += (v.adjoint() * rho * v)[(0, 0)].re;
        }
    }
    w
}

/// Overlaps `|<r_a|g_b>|^2` between two eigenbases.
fn overlaps(r: &Eigh, g: &Eigh) -> CMatrix {
    let o = r.vectors.adjoint() * &g.vectors;
    o.map(|z| linalg::real(z.norm_sqr()))
}

/// `Tr(rho^a gamma^(1-a))` for positive, possibly subnormalized, blocks;
/// `a = 0` means the support projector of `rho`. `None` when `a > 1` and
/// `rho` leaves the support of `gamma`.
fn petz_quasi(rho: &CMatrix, gamma: &CMatrix, alpha: f64) -> Option<f64> {
    let r = linalg::eigh(rho);
    let g = linalg::eigh(gamma);
    if alpha > 1.0 && outside_support(rho, &g) > SUPPORT_TOL {
        return None;
    }
    let o = overlaps(&r, &g);
    let mut q = 0.0;
    for (a, &ra) in r.values.iter().enumerate() {
        let ra = clip(ra);
        if ra == 0.0 {
            continue;
        }
        let ra_pow = if alpha == 0.0 { 1.0 } else { ra.powf(alpha) };
        for (b, &gb) in g.values.iter().enumerate() {
            let gb = clip(gb);
            if gb == 0.0 {
                continue;
            }
            q += ra_pow * gb.powf(1.0 - alpha) * o[(a, b)].re;
        }
    }
    Some(q)
}

/// `Tr rho log rho - Tr rho log gamma` for blocks; `None` off support.
fn relative_entropy_block(rho: &CMatrix, gamma: &CMatrix) -> Option<f64> {
    let r = linalg::eigh(rho);
    let g = linalg::eigh(gamma);
    if outside_support(rho, &g) > SUPPORT_TOL {
        return None;
    }
    let o = overlaps(&r, &g);
    let mut d = 0.0;
    for (a, &ra) in r.values.iter().enumerate() {
        let ra = clip(ra);
        if ra == 0.0 {
            continue;
        }
        d += ra * ra.ln();
        for (b, &gb) in g.values.iter().enumerate() {
            let gb = clip(gb);
            if gb > 0.0 {
                d -= ra * gb.ln() * o[(a, b)].re;
            }
        }
    }
    Some(d)
}

fn from_quasi(q: Option<f64>, alpha: f64) -> f64 {
    match q {
        None => f64::INFINITY,
        Some(q) if q <= 0.0 => {
            if alpha < 1.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
        Some(q) => q.ln() / (alpha - 1.0),
    }
}

fn check_pair(rho: &DensityMatrix, gamma: &DensityMatrix) -> Result<()> {
    if rho.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// Rényi divergence of the pair pinched onto the eigenspaces of `W`. When
/// `gamma` is a function of `W`, the pinched pair commutes and this is the
/// classical divergence of the pinched spectra, monotone for every `alpha >= 0`.
pub fn classical_renyi(rho: &DensityMatrix, gamma: &DensityMatrix, w: &PayoffFunction, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair(rho, gamma)?;
    if w.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: rho.dim(),
        });
    }
    let rb = w.blocks(rho.matrix());
    let gb = w.blocks(gamma.matrix());
    if alpha == 1.0 {
        let mut d = 0.0;
        for (r, g) in rb.iter().zip(&gb) {
            match relative_entropy_block(r, g) {
                Some(x) => d += x,
                None => return Ok(f64::INFINITY),
            }
        }
        return Ok(d.max(0.0));
    }
    let mut q = 0.0;
    for (r, g) in rb.iter().zip(&gb) {
        match petz_quasi(r, g, alpha) {
            Some(x) => q += x,
            None => return Ok(f64::INFINITY),
        }
    }
    Ok(from_quasi(Some(q), alpha))
}

/// Quantum Rényi divergence; fails outside the variant's validity range.
pub fn quantum_renyi(rho: &DensityMatrix, gamma: &DensityMatrix, alpha: f64, variant: RenyiVariant) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair(rho, gamma)?;
    if !variant.valid_at(alpha) {
        return Err(Error::AlphaOutOfRange {
            alpha,
            variant: variant.name(),
        });
    }
    if alpha == 1.0 {
        return relative_entropy(rho, gamma);
    }
    match variant {
        RenyiVariant::Petz => Ok(from_quasi(petz_quasi(rho.matrix(), gamma.matrix(), alpha), alpha)),
        RenyiVariant::Sandwiched => {
            let g = gamma.spectrum();
            if alpha > 1.0 && outside_support(rho.matrix(), g) > SUPPORT_TOL {
                return Ok(f64::INFINITY);
            }
            let s = (1.0 - alpha) / (2.0 * alpha);
            let gs = g.map(|x| {
                let x = clip(x);
                if x == 0.0 {
                    0.0
                } else {
                    x.powf(s)
                }
            });
            let inner = linalg::hermitian_part(&(&gs * rho.matrix() * &gs));
            let q: f64 = linalg::eigh(&inner).values.iter().map(|&x| clip(x).powf(alpha)).sum();
            Ok(from_quasi(Some(q), alpha))
        }
    }
}

/// `F_alpha = T D_alpha(rho || gamma) - T log Z` over a grid of orders, with
/// `T = 1/mu_0`. Quantum entries are `None` where the variant is not monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyProfile {
    pub alphas: Vec<f64>,
    pub temperature: f64,
    pub log_partition: f64,
    #[serde(with = "crate::io::float_vec")]
    pub classical: Vec<f64>,
    #[serde(with = "crate::io::float_opt_vec")]
    pub petz: Vec<Option<f64>>,
    #[serde(with = "crate::io::float_opt_vec")]
    pub sandwiched: Vec<Option<f64>>,
}

pub(crate) fn temperature(mu: &[f64]) -> Result<f64> {
    match mu.first() {
        Some(&b) if b > 0.0 && b.is_finite() => Ok(1.0 / b),
        _ => Err(Error::InvalidArgument(
            "free energies need a positive inverse temperature mu[0]".into(),
        )),
    }
}

/// Free energies of `rho` relative to the NATS with potentials `mu` on the
/// space of `family`.
pub fn free_energy_profile(
    rho: &DensityMatrix,
    family: &ChargeFamily,
    mu: &[f64],
    alphas: &[f64],
) -> Result<FreeEnergyProfile> {
    let t = temperature(mu)?;
    let gamma = build_nats(family, mu)?;
    let w = payoff_operator(family, mu)?;
    let log_z = log_partition(family, mu)?;
    let mut classical = Vec::with_capacity(alphas.len());
    let mut petz = Vec::with_capacity(alphas.len());
    let mut sandwiched = Vec::with_capacity(alphas.len());
    let f = |d: f64| t * d - t * log_z;
    for &a in alphas {
        classical.push(f(classical_renyi(rho, &gamma, &w, a)?));
        petz.push(if RenyiVariant::Petz.valid_at(a) {
            Some(f(quantum_renyi(rho, &gamma, a, RenyiVariant::Petz)?))
        } else {
            None
        });
        sandwiched.push(if RenyiVariant::Sandwiched.valid_at(a) {
            Some(f(quantum_renyi(rho, &gamma, a, RenyiVariant::Sandwiched)?))
        } else {
            None
        });
    }
    Ok(FreeEnergyProfile {
        alphas: alphas.to_vec(),
        temperature: t,
        log_partition: log_z,
        classical,
        petz,
        sandwiched,
    })
}

/// `F_1 = <H> - T S + sum_{j>=1} (mu_j / mu_0) <Q_j>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Decomposition {
    pub energy: f64,
    pub temperature: f64,
    pub entropy: f64,
    /// `(mu_j / mu_0) <Q_j>` for `j >= 1`.
    pub charge_terms: Vec<f64>,
    pub value: f64,
}

pub fn f1_decomposition(rho: &DensityMatrix, family: &ChargeFamily, mu: &[f64]) -> Result<F1Decomposition> {
    if mu.len() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            found: mu.len(),
        });
    }
    if rho.dim() != family.site_dim() {
        return Err(Error::DimensionMismatch {
            expected: family.site_dim(),
            found: rho.dim(),
        });
    }
    let t = temperature(mu)?;
    let energy = rho.expectation(family.charge(0));
    let entropy = von_neumann_entropy(rho);
    let charge_terms: Vec<f64> = (1..family.len())
        .map(|j| mu[j] * t * rho.expectation(family.charge(j)))
        .collect();
    let value = energy - t * entropy + charge_terms.iter().sum::<f64>();
    Ok(F1Decomposition {
        energy,
        temperature: t,
        entropy,
        charge_terms,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::HermitianOperator;
    use crate::random::{random_density, random_unitary, substream};
    use crate::testing::spin_family;

    fn qubit_energy() -> ChargeFamily {
        ChargeFamily::unlabeled(vec![HermitianOperator::from_real_diagonal(&[0.0, 1.0])]).unwrap()
    }

    fn diag(p: &[f64]) -> DensityMatrix {
        DensityMatrix::from_populations(p).unwrap()
    }

    fn flat_payoff() -> PayoffFunction {
        PayoffFunction::from_operator(HermitianOperator::from_real_diagonal(&[0.0, 1.0]), vec![1.0])
    }

    #[test]
    fn classical_examples() {
        let w = flat_payoff();
        let p = diag(&[0.9, 0.1]);
        let q = diag(&[0.5, 0.5]);
        assert!((classical_renyi(&p, &q, &w, 2.0).unwrap() - 1.64f64.ln()).abs() < 1e-12);
        assert!(classical_renyi(&p, &p, &w, 0.7).unwrap().abs() < 1e-12);
        let pure = diag(&[1.0, 0.0]);
        let g = diag(&[0.7, 0.3]);
        assert!((classical_renyi(&pure, &g, &w, 0.0).unwrap() + 0.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn classical_is_infinite_off_support_above_one() {
        let w = flat_payoff();
        let p = diag(&[0.5, 0.5]);
        let q = diag(&[1.0, 0.0]);
        assert_eq!(classical_renyi(&p, &q, &w, 2.0).unwrap(), f64::INFINITY);
        assert_eq!(classical_renyi(&p, &q, &w, 1.0).unwrap(), f64::INFINITY);
        assert!(classical_renyi(&p, &q, &w, 0.5).unwrap().is_finite());
    }

    #[test]
    fn classical_one_matches_kl_for_diagonal_pairs() {
        let w = flat_payoff();
        let p = diag(&[0.8, 0.2]);
        let q = diag(&[0.4, 0.6]);
        let kl = 0.8 * (0.8f64 / 0.4).ln() + 0.2 * (0.2f64 / 0.6).ln();
        assert!((classical_renyi(&p, &q, &w, 1.0).unwrap() - kl).abs() < 1e-12);
        // Continuity at alpha = 1.
        let near = classical_renyi(&p, &q, &w, 1.0 + 1e-6).unwrap();
        assert!((near - kl).abs() < 1e-5);
    }

    #[test]
    fn variants_agree_on_commuting_pairs() {
        let p = diag(&[0.6, 0.3, 0.1]);
        let q = diag(&[0.2, 0.5, 0.3]);
        for a in [0.5, 0.8, 1.5, 2.0] {
            let x = quantum_renyi(&p, &q, a, RenyiVariant::Petz).unwrap();
            let y = quantum_renyi(&p, &q, a, RenyiVariant::Sandwiched).unwrap();
            assert!((x - y).abs() < 1e-12, "alpha {a}: {x} vs {y}");
        }
    }

    #[test]
    fn sandwiched_below_petz() {
        let mut rng = substream(4, 0);
        let r = random_density(3, &mut rng);
        let g = random_density(3, &mut rng);
        for a in [0.6, 1.3, 2.0] {
            let p = quantum_renyi(&r, &g, a, RenyiVariant::Petz).unwrap();
            let s = quantum_renyi(&r, &g, a, RenyiVariant::Sandwiched).unwrap();
            assert!(s <= p + 1e-12, "alpha {a}: sandwiched {s} > petz {p}");
        }
    }

    #[test]
    fn petz_two_matches_inverse_formula() {
        let mut rng = substream(5, 0);
        let r = random_density(2, &mut rng);
        let g = random_density(2, &mut rng);
        let inv = g.matrix().clone().try_inverse().unwrap();
        let q = linalg::trace(&(r.matrix() * r.matrix() * inv)).re;
        let d = quantum_renyi(&r, &g, 2.0, RenyiVariant::Petz).unwrap();
        assert!((d - q.ln()).abs() < 1e-10);
    }

    #[test]
    fn quantum_variants_are_continuous_at_one() {
        let mut rng = substream(8, 0);
        let r = random_density(3, &mut rng);
        let g = random_density(3, &mut rng);
        let d = relative_entropy(&r, &g).unwrap();
        for variant in [RenyiVariant::Petz, RenyiVariant::Sandwiched] {
            for a in [1.0 - 1e-7, 1.0 + 1e-7] {
                let x = quantum_renyi(&r, &g, a, variant).unwrap();
                assert!((x - d).abs() < 1e-6, "{variant:?} at {a}: {x} vs {d}");
            }
        }
    }

    #[test]
    fn validity_ranges_enforced() {
        let p = diag(&[0.5, 0.5]);
        assert!(matches!(
            quantum_renyi(&p, &p, 3.0, RenyiVariant::Petz),
            Err(Error::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            quantum_renyi(&p, &p, 0.3, RenyiVariant::Sandwiched),
            Err(Error::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            quantum_renyi(&p, &p, -1.0, RenyiVariant::Petz),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn nats_has_zero_divergence_and_f1_is_minus_t_log_z() {
        let fam = spin_family();
        let mu = [0.7, 0.1, -0.4];
        let g = build_nats(&fam, &mu).unwrap();
        let prof = free_energy_profile(&g, &fam, &mu, &[0.0, 0.5, 1.0, 2.0, 3.0]).unwrap();
        let base = -prof.temperature * prof.log_partition;
        for (i, f) in prof.classical.iter().enumerate() {
            assert!((f - base).abs() < 1e-10, "alpha {}: {f}", prof.alphas[i]);
        }
        assert_eq!(prof.petz[4], None);
        assert_eq!(prof.sandwiched[0], None);
        let dec = f1_decomposition(&g, &fam, &mu).unwrap();
        assert!((dec.value - base).abs() < 1e-10);
    }

    #[test]
    fn f1_decomposition_matches_quantum_f1() {
        let fam = spin_family();
        let mu = [1.3, 0.2, 0.5];
        let rho = random_density(2, &mut substream(6, 0));
        let prof = free_energy_profile(&rho, &fam, &mu, &[1.0]).unwrap();
        let dec = f1_decomposition(&rho, &fam, &mu).unwrap();
        assert!((prof.petz[0].unwrap() - dec.value).abs() < 1e-10);
    }

    #[test]
    fn thermal_f1_is_helmholtz() {
        let fam = qubit_energy();
        let beta = 2.0;
        let g = build_nats(&fam, &[beta]).unwrap();
        let dec = f1_decomposition(&g, &fam, &[beta]).unwrap();
        let helmholtz = -(1.0 + (-beta).exp()).ln() / beta;
        assert!((dec.value - helmholtz).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_inverse_temperature_rejected() {
        let fam = qubit_energy();
        let rho = diag(&[0.5, 0.5]);
        assert!(matches!(f1_decomposition(&rho, &fam, &[0.0]), Err(Error::InvalidArgument(_))));
        assert!(free_energy_profile(&rho, &fam, &[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn classical_ignores_coherence_between_payoff_levels() {
        let fam = qubit_energy();
        let mu = [1.0];
        let g = build_nats(&fam, &mu).unwrap();
        let w = payoff_operator(&fam, &mu).unwrap();
        let u = random_unitary(2, &mut substream(2, 0));
        let rho = diag(&[0.3, 0.7]).conjugate_by(&u);
        let pinched = DensityMatrix::new(w.pinch(rho.matrix())).unwrap();
        for a in [0.0, 0.5, 2.0, 4.0] {
            let x = classical_renyi(&rho, &g, &w, a).unwrap();
            let y = classical_renyi(&pinched, &g, &w, a).unwrap();
            assert!((x - y).abs() < 1e-12);
        }
    }
}
