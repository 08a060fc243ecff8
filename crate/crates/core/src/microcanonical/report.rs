//! The flat state on a subspace and the site-by-site comparison of its
//! reductions with the NATS.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_subspace, condition1_defect, Subspace};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::nats::{build_nats, NatsParams, TargetValues};
use crate::qops::{
    log_operator, reduced_state_of_vector, relative_entropy, trace_distance, von_neumann_entropy,
    ChargeFamily, DensityMatrix,
};

/// `P / Tr(P)`.
pub fn amc_state(m: &Subspace) -> Result<DensityMatrix> {
    if m.dim() == 0 {
        return Err(Error::EmptySubspace);
    }
    let p = linalg::hermitian_part(&m.projector());
    Ok(DensityMatrix::from_trusted(p / linalg::real(m.dim() as f64)))
}

/// Single-site reductions `Omega_l` of the flat state on `M`, one per site.
pub fn site_states(m: &Subspace) -> Result<Vec<DensityMatrix>> {
    if m.dim() == 0 {
        return Err(Error::EmptySubspace);
    }
    let d = m.site_dim;
    let scale = linalg::real(1.0 / m.dim() as f64);
    (0..m.copies)
        .into_par_iter()
        .map(|site| {
            let mut acc = CMatrix::zeros(d, d);
            for k in 0..m.dim() {
                let b = m.basis.column(k).into_owned();
                acc += reduced_state_of_vector(&b, d, site)?.matrix();
            }
            Ok(DensityMatrix::from_trusted(linalg::hermitian_part(&(acc * scale))))
        })
        .collect()
}

/// Comparison of one site's reduction with the NATS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteReport {
    pub site: usize,
    pub relative_entropy: f64,
    pub trace_distance: f64,
    pub entropy: f64,
    /// `D >= ||Omega_l - gamma||_1^2 / 2`.
    pub pinsker_holds: bool,
}

/// Site reductions of the flat state on `M` against the NATS fitted to the
/// same targets, with every intermediate quantity of the bound chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub copies: usize,
    pub subspace_dim: usize,
    pub eta: f64,
    /// Condition-1 defect of `M` at `eta`.
    pub delta: f64,
    pub mu: Vec<f64>,
    pub log_partition: f64,
    pub sites: Vec<SiteReport>,
    /// `(1/N) sum_l D(Omega_l || gamma)`.
    pub average_relative_entropy: f64,
    /// `Tr(Omega Qbar_j)`.
    pub w: Vec<f64>,
    /// `|w_j - v_j|`.
    pub xi: Vec<f64>,
    /// `(eta + 2 delta) ||Q_j||`.
    pub xi_bound: Vec<f64>,
    /// `S(Omega) = log dim M`.
    pub entropy_omega: f64,
    pub sum_site_entropies: f64,
    /// `N S(gamma)`.
    pub n_entropy_nats: f64,
    /// `S(Omega) - N S(gamma)`; the typical-subspace constant is not estimated.
    pub schumacher_gap: f64,
    /// `log dim M / (N S(gamma))`.
    pub entropy_ratio: f64,
    /// `(c+1) max|mu_j| (eta + 2 delta) max ||Q_j||`.
    pub theta_prime: f64,
    /// `-(1/N) sum_l Tr(Omega_l log gamma)`.
    pub cross_entropy: f64,
    /// `log Z + sum_j mu_j w_j`.
    pub cross_entropy_dual: f64,
}

/// Evaluates the relative-entropy bound chain for the flat state on `M`.
pub fn theorem1_report(
    m: &Subspace,
    family: &ChargeFamily,
    targets: &TargetValues,
    nats: &NatsParams,
) -> Result<Theorem1Report> {
    check_subspace(m, family)?;
    if nats.mu.len() != family.len() || targets.len() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            found: if nats.mu.len() != family.len() { nats.mu.len() } else { targets.len() },
        });
    }
    let eta = m.params.eta;
    let delta = condition1_defect(m, family, targets, eta)?;
    let gamma = build_nats(family, &nats.mu)?;
    let log_gamma = log_operator(gamma.as_operator());
    let omegas = site_states(m)?;
    let n = m.copies as f64;

    let sites = omegas
        .iter()
        .enumerate()
        .map(|(site, om)| {
            let d = relative_entropy(om, &gamma)?;
            let t = trace_distance(om, &gamma)?;
            Ok(SiteReport {
                site,
                relative_entropy: d,
                trace_distance: t,
                entropy: von_neumann_entropy(om),
                pinsker_holds: d >= 0.5 * t * t - 1e-12,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let average_relative_entropy = sites.iter().map(|s| s.relative_entropy).sum::<f64>() / n;

    let w: Vec<f64> = family
        .charges()
        .iter()
        .map(|q| omegas.iter().map(|om| om.expectation(q)).sum::<f64>() / n)
        .collect();
    let xi: Vec<f64> = w.iter().zip(&targets.v).map(|(a, b)| (a - b).abs()).collect();
    let xi_bound: Vec<f64> = family
        .charges()
        .iter()
        .map(|q| (eta + 2.0 * delta) * q.op_norm())
        .collect();

    let entropy_omega = (m.dim() as f64).ln();
    let sum_site_entropies = sites.iter().map(|s| s.entropy).sum();
    let n_entropy_nats = n * von_neumann_entropy(&gamma);
    let max_mu = nats.mu.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let max_norm = family.charges().iter().fold(0.0_f64, |a, q| a.max(q.op_norm()));
    let theta_prime = family.len() as f64 * max_mu * (eta + 2.0 * delta) * max_norm;
    let cross_entropy = -omegas
        .iter()
        .map(|om| om.expectation(&log_gamma))
        .sum::<f64>()
        / n;
    let log_z = crate::nats::log_partition(family, &nats.mu)?;
    let cross_entropy_dual = log_z + nats.mu.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();

    Ok(Theorem1Report {
        copies: m.copies,
        subspace_dim: m.dim(),
        eta,
        delta,
        mu: nats.mu.clone(),
        log_partition: log_z,
        sites,
        average_relative_entropy,
        w,
        xi,
        xi_bound,
        entropy_omega,
        sum_site_entropies,
        n_entropy_nats,
        schumacher_gap: entropy_omega - n_entropy_nats,
        entropy_ratio: if n_entropy_nats > 0.0 { entropy_omega / n_entropy_nats } else { f64::NAN },
        theta_prime,
        cross_entropy,
        cross_entropy_dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcanonical::{build_amc, Provenance, SubspaceParams};
    use crate::nats::fit_potentials;
    use crate::qops::{partial_trace, HermitianOperator};
    use crate::random::{random_unitary, substream};
    use crate::testing::spin_family;

    fn number_family() -> ChargeFamily {
        ChargeFamily::unlabeled(vec![HermitianOperator::from_real_diagonal(&[0.0, 1.0])]).unwrap()
    }

    #[test]
    fn flat_state_examples() {
        let full = Subspace::full(2, 2, 0.1).unwrap();
        let om = amc_state(&full).unwrap();
        assert!(linalg::frobenius_norm(&(om.matrix() - linalg::identity(4) * linalg::real(0.25))) < 1e-15);

        let u = random_unitary(4, &mut substream(1, 0));
        let b = u.columns(0, 1).into_owned();
        let m = Subspace::new(2, 2, b, Provenance::Approximated, SubspaceParams::with_eta(0.1)).unwrap();
        let om = amc_state(&m).unwrap();
        assert!(von_neumann_entropy(&om).abs() < 1e-10);

        let b3 = u.columns(0, 3).into_owned();
        let m3 = Subspace::new(2, 2, b3, Provenance::Approximated, SubspaceParams::with_eta(0.1)).unwrap();
        assert!((von_neumann_entropy(&amc_state(&m3).unwrap()) - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn site_states_match_partial_trace() {
        let u = random_unitary(8, &mut substream(2, 0));
        let b = u.columns(0, 3).into_owned();
        let m = Subspace::new(3, 2, b, Provenance::Approximated, SubspaceParams::with_eta(0.1)).unwrap();
        let om = amc_state(&m).unwrap();
        let sites = site_states(&m).unwrap();
        for (l, s) in sites.iter().enumerate() {
            let r = partial_trace(&om, 2, l).unwrap();
            assert!(linalg::frobenius_norm(&(r.matrix() - s.matrix())) < 1e-14);
        }
    }

    #[test]
    fn full_space_at_maximally_mixed_moments() {
        let fam = spin_family();
        let t = TargetValues::new(vec![0.0, 0.0, 0.0]);
        let nats = fit_potentials(&fam, &t, 1e-10).unwrap();
        let m = Subspace::full(3, 2, 1.0).unwrap();
        let r = theorem1_report(&m, &fam, &t, &nats).unwrap();
        for s in &r.sites {
            assert!(s.relative_entropy.abs() < 1e-12);
        }
        assert!(r.delta < 1e-12);
    }

    #[test]
    fn report_chain_identities() {
        let fam = number_family();
        let t = TargetValues::new(vec![0.3]);
        let nats = fit_potentials(&fam, &t, 1e-12).unwrap();
        let m = build_amc(&fam, &t, 8, 0.15).unwrap();
        let r = theorem1_report(&m, &fam, &t, &nats).unwrap();
        assert!((r.cross_entropy - r.cross_entropy_dual).abs() < 1e-9);
        assert!(r.entropy_omega <= r.sum_site_entropies + 1e-9);
        for j in 0..r.xi.len() {
            assert!(r.xi[j] <= r.xi_bound[j]);
        }
        assert!(r.sites.iter().all(|s| s.pinsker_holds));
        assert!(r.delta <= 1e-10);
    }

    #[test]
    fn spin_pipeline_reports_finite_values() {
        let fam = spin_family();
        let t = TargetValues::new(vec![0.0, 0.0, -0.2]);
        let nats = fit_potentials(&fam, &t, 1e-10).unwrap();
        let m = build_amc(&fam, &t, 4, 0.2).unwrap();
        let r = theorem1_report(&m, &fam, &t, &nats).unwrap();
        assert!(r.average_relative_entropy.is_finite());
        assert!(r.xi.iter().all(|x| *x >= 0.0));
    }
}
