//! Approximate microcanonical subspaces on `N` copies of a system.
//!
//! A subspace `M` is built from windows around target values of the
//! copy-averaged charges `Qbar_j = (1/N) sum_l Q_j^(l)`, then certified:
//! condition 1 asks that every state in `M` gives each `Qbar_j` a value near
//! its target with high probability, condition 2 that every state with sharp
//! statistics mostly lives in `M`.

mod approximants;
mod certify;
mod report;

pub use approximants::{commuting_approximants, Approximants, MAX_SWEEPS, SWEEP_TOL};
pub use certify::{
    condition1_defect, condition2_defect, hoeffding_check, hoeffding_check_with_state,
    mollifier_gap_check, Condition2Bounds, HoeffdingCheck, MollifierGap,
};
pub use report::{amc_state, site_states, theorem1_report, SiteReport, Theorem1Report};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::nats::TargetValues;
use crate::qops::{embed_site, ChargeFamily, HermitianOperator, SpectralWindow};

/// Relative endpoint slack of spectral windows, in units of the single-copy
/// spectral diameter.
pub const WINDOW_SLACK: f64 = 1e-12;
/// Column orthonormality tolerance of a subspace basis.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Charges whose pairwise commutators are below this use the exact
/// commuting construction.
pub const COMMUTING_TOL: f64 = 1e-12;

/// How a subspace was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Intersection of window projectors of commuting averaged charges.
    Commuting,
    /// Windows of jointly diagonal approximants of noncommuting averages.
    Approximated,
}

/// Certification parameters. Only `eta` is fixed at construction; the rest are
/// filled in once the conditions have been evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceParams {
    pub eta: f64,
    pub eta_prime: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub delta_prime: Option<f64>,
}

impl SubspaceParams {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            eta_prime: None,
            epsilon: None,
            delta: None,
            delta_prime: None,
        }
    }
}

/// Orthonormal basis of a subspace of the `site_dim^copies` space.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub copies: usize,
    pub site_dim: usize,
    /// Columns span the subspace.
    pub basis: CMatrix,
    pub params: SubspaceParams,
    pub provenance: Provenance,
    /// Spectral-norm error of the commuting approximants, when used.
    pub approximant_error: Option<f64>,
}

impl Subspace {
    /// Validates dimensions and column orthonormality.
    pub fn new(
        copies: usize,
        site_dim: usize,
        basis: CMatrix,
        provenance: Provenance,
        params: SubspaceParams,
    ) -> Result<Self> {
        let total = linalg::checked_power_dim(site_dim, copies)?;
        if basis.nrows() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: basis.nrows(),
            });
        }
        if basis.ncols() == 0 {
            return Err(Error::EmptySubspace);
        }
        let gram = basis.adjoint() * &basis;
        let defect = linalg::op_norm(&(gram - linalg::identity(basis.ncols())));
        if !(defect <= ORTHONORMALITY_TOL) {
            return Err(Error::InvalidArgument(format!(
                "subspace basis is not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self {
            copies,
            site_dim,
            basis,
            params,
            provenance,
            approximant_error: None,
        })
    }

    /// The whole `site_dim^copies` space.
    pub fn full(copies: usize, site_dim: usize, eta: f64) -> Result<Self> {
        let total = linalg::checked_power_dim(site_dim, copies)?;
        Self::new(
            copies,
            site_dim,
            linalg::identity(total),
            Provenance::Commuting,
            SubspaceParams::with_eta(eta),
        )
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn total_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `P = B B^dagger`.
    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }
}

/// `(1/N) sum_l I ⊗ .. ⊗ Q ⊗ .. ⊗ I`.
pub fn average_charge(q: &HermitianOperator, copies: usize) -> Result<HermitianOperator> {
    if copies == 0 {
        return Err(Error::InvalidArgument("copies must be at least 1".into()));
    }
    let mut acc: Option<CMatrix> = None;
    for site in 0..copies {
        let e = embed_site(q, site, copies)?.into_matrix();
        acc = Some(match acc {
            None => e,
            Some(a) => a + e,
        });
    }
    let m = acc.expect("copies >= 1") / linalg::real(copies as f64);
    Ok(HermitianOperator::from_hermitian(m))
}

/// `lambda_max(Q) - lambda_min(Q)`.
pub fn spectral_diameter(q: &HermitianOperator) -> f64 {
    q.spectral_diameter()
}

/// Projector onto the eigenspaces of an operator whose eigenvalues lie in a
/// closed window.
#[derive(Debug, Clone)]
pub struct WindowProjector {
    pub projector: HermitianOperator,
    /// Orthonormal columns spanning the range.
    pub basis: CMatrix,
    /// Set when no eigenvalue falls in the window; the projector is then zero.
    pub empty: bool,
}

impl WindowProjector {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// Window `[v - eta*sigma, v + eta*sigma]` with endpoint slack
/// `WINDOW_SLACK * sigma`.
pub fn window(v: f64, eta: f64, sigma: f64) -> Result<SpectralWindow> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be non-negative, got {eta}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "spectral diameter must be non-negative, got {sigma}"
        )));
    }
    SpectralWindow::new(v, eta * sigma)
}

/// `Pi^eta`: eigenspaces of `qbar` with eigenvalues in
/// `[v - eta*sigma, v + eta*sigma]`, where `sigma` is the single-copy
/// spectral diameter.
pub fn window_projector(qbar: &HermitianOperator, v: f64, eta: f64, sigma: f64) -> Result<WindowProjector> {
    let w = window(v, eta, sigma)?;
    let slack = WINDOW_SLACK * sigma;
    let spec = qbar.spectrum();
    let keep: Vec<usize> = (0..spec.values.len())
        .filter(|&k| w.contains(spec.values[k], slack))
        .collect();
    let n = qbar.dim();
    let mut basis = CMatrix::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &spec.vectors.column(src));
    }
    let projector = if keep.is_empty() {
        CMatrix::zeros(n, n)
    } else {
        linalg::hermitian_part(&(&basis * basis.adjoint()))
    };
    Ok(WindowProjector {
        projector: HermitianOperator::from_hermitian(projector),
        empty: keep.is_empty(),
        basis,
    })
}

/// Window projectors of every averaged charge of `family` on `copies` sites.
pub(crate) fn family_windows(
    family: &ChargeFamily,
    targets: &TargetValues,
    copies: usize,
    eta: f64,
) -> Result<Vec<WindowProjector>> {
    check_targets(family, targets)?;
    family
        .charges()
        .iter()
        .zip(&targets.v)
        .map(|(q, &v)| window_projector(&average_charge(q, copies)?, v, eta, q.spectral_diameter()))
        .collect()
}

fn check_targets(family: &ChargeFamily, targets: &TargetValues) -> Result<()> {
    if targets.len() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            found: targets.len(),
        });
    }
    Ok(())
}

fn check_subspace(m: &Subspace, family: &ChargeFamily) -> Result<()> {
    if m.site_dim != family.site_dim() {
        return Err(Error::DimensionMismatch {
            expected: family.site_dim(),
            found: m.site_dim,
        });
    }
    if m.dim() == 0 {
        return Err(Error::EmptySubspace);
    }
    Ok(())
}

/// Builds an approximate microcanonical subspace at window width `eta`.
///
/// Commuting charges give the intersection of the windows of the averaged
/// charges. Otherwise the averages are replaced by jointly diagonal
/// approximants and `M` is spanned by the joint eigenvectors whose
/// eigenvalues all fall inside their windows.
pub fn build_amc(family: &ChargeFamily, targets: &TargetValues, copies: usize, eta: f64) -> Result<Subspace> {
    check_targets(family, targets)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    linalg::checked_power_dim(family.site_dim(), copies)?;
    let params = SubspaceParams::with_eta(eta);

    if family.is_commuting(COMMUTING_TOL) {
        let windows = family_windows(family, targets, copies, eta)?;
        if windows.iter().any(|w| w.empty) {
            return Err(Error::EmptySubspace);
        }
        let mut p = windows[0].projector.matrix().clone();
        for w in &windows[1..] {
            p = &p * w.projector.matrix();
        }
        let basis = linalg::projector_range(&linalg::hermitian_part(&p));
        if basis.ncols() == 0 {
            return Err(Error::EmptySubspace);
        }
        return Subspace::new(copies, family.site_dim(), basis, Provenance::Commuting, params);
    }

    let qbars = family
        .charges()
        .iter()
        .map(|q| average_charge(q, copies))
        .collect::<Result<Vec<_>>>()?;
    let approx = commuting_approximants(&qbars)?;
    let n = approx.basis.nrows();
    let mut inside = vec![true; n];
    for (j, q) in family.charges().iter().enumerate() {
        let sigma = q.spectral_diameter();
        let w = window(targets.v[j], eta, sigma)?;
        for (k, y) in approx.joint_eigenvalues(j).into_iter().enumerate() {
            inside[k] &= w.contains(y, WINDOW_SLACK * sigma);
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&k| inside[k]).collect();
    if keep.is_empty() {
        return Err(Error::EmptySubspace);
    }
    let mut basis = CMatrix::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &approx.basis.column(src));
    }
    let mut m = Subspace::new(copies, family.site_dim(), basis, Provenance::Approximated, params)?;
    m.approximant_error = Some(approx.eps_num);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, op_norm};
    use crate::random::{random_hermitian, substream};

    fn sz() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[0.5, -0.5])
    }

    #[test]
    fn average_of_one_copy_is_the_charge() {
        let q = HermitianOperator::new(random_hermitian(3, &mut substream(1, 0))).unwrap();
        let a = average_charge(&q, 1).unwrap();
        assert!(frobenius_norm(&(a.matrix() - q.matrix())) < 1e-15);
    }

    #[test]
    fn average_of_two_spins() {
        let a = average_charge(&sz(), 2).unwrap();
        assert_eq!(a.matrix(), &linalg::from_real_diagonal(&[0.5, 0.0, 0.0, -0.5]));
    }

    #[test]
    fn averaging_does_not_widen_the_spectrum() {
        for seed in 0..5 {
            let q = HermitianOperator::new(random_hermitian(2, &mut substream(seed, 0))).unwrap();
            for n in 1..=4 {
                let a = average_charge(&q, n).unwrap();
                assert!(a.spectral_diameter() <= q.spectral_diameter() + 1e-12);
                assert!(a.op_norm() <= q.op_norm() + 1e-12);
            }
        }
    }

    #[test]
    fn window_examples() {
        let a = average_charge(&sz(), 2).unwrap();
        let full = window_projector(&a, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(full.rank(), 4);
        assert!(frobenius_norm(&(full.projector.matrix() - linalg::identity(4))) < 1e-15);

        let mid = window_projector(&a, 0.0, 0.1, 1.0).unwrap();
        assert_eq!(mid.projector.matrix(), &linalg::from_real_diagonal(&[0.0, 1.0, 1.0, 0.0]));

        let none = window_projector(&a, 0.25, 0.1, 1.0).unwrap();
        assert!(none.empty);
        assert_eq!(none.rank(), 0);
        assert_eq!(none.projector.matrix(), &CMatrix::zeros(4, 4));
    }

    #[test]
    fn window_endpoints_are_closed() {
        let a = average_charge(&sz(), 2).unwrap();
        let w = window_projector(&a, 0.25, 0.25, 1.0).unwrap();
        assert_eq!(w.rank(), 3);
    }

    #[test]
    fn window_projectors_are_idempotent_and_commute() {
        let q = HermitianOperator::new(random_hermitian(2, &mut substream(7, 0))).unwrap();
        let a = average_charge(&q, 3).unwrap();
        let w = window_projector(&a, 0.0, 0.3, q.spectral_diameter()).unwrap();
        let p = w.projector.matrix();
        assert!(op_norm(&(p * p - p)) <= 1e-10);
        assert!(op_norm(&linalg::commutator(p, a.matrix())) <= 1e-10);
    }

    #[test]
    fn commuting_build_matches_diagonal_filter() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let n = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 1.0]);
        let fam = ChargeFamily::unlabeled(vec![h.clone(), n.clone()]).unwrap();
        let t = TargetValues::new(vec![1.0, 0.5]);
        let m = build_amc(&fam, &t, 3, 0.2).unwrap();
        assert_eq!(m.provenance, Provenance::Commuting);
        // Brute-force filter over product basis states.
        let hbar = average_charge(&h, 3).unwrap();
        let nbar = average_charge(&n, 3).unwrap();
        let mut expected = vec![0.0; 27];
        for (k, e) in expected.iter_mut().enumerate() {
            let eh = hbar.matrix()[(k, k)].re;
            let en = nbar.matrix()[(k, k)].re;
            if (eh - 1.0).abs() <= 0.4 + 1e-12 && (en - 0.5).abs() <= 0.2 + 1e-12 {
                *e = 1.0;
            }
        }
        let p = m.projector();
        assert!(frobenius_norm(&(p - linalg::from_real_diagonal(&expected))) < 1e-12);
    }

    #[test]
    fn exact_energy_shell() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let m = build_amc(&fam, &TargetValues::new(vec![0.0]), 4, 1e-6).unwrap();
        // Zero magnetization on four spins: C(4,2) states.
        assert_eq!(m.dim(), 6);
    }

    #[test]
    fn incompatible_targets_give_empty_subspace() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let r = build_amc(&fam, &TargetValues::new(vec![0.1]), 2, 0.01);
        assert!(matches!(r, Err(Error::EmptySubspace)));
    }

    #[test]
    fn subspace_rejects_non_orthonormal_basis() {
        let b = CMatrix::from_element(4, 1, linalg::ONE);
        let r = Subspace::new(2, 2, b, Provenance::Commuting, SubspaceParams::with_eta(0.1));
        assert!(r.is_err());
    }
}
