//! Certification of the two defining conditions of an approximate
//! microcanonical subspace, plus concentration and mollifier checks.

use serde::{Deserialize, Serialize};

use super::{check_subspace, family_windows, Subspace, WindowProjector};
use crate::error::{Error, Result};
use crate::linalg::{self, eigh, CMatrix, CVector};
use crate::nats::{build_nats, fit_potentials, TargetValues};
use crate::qops::{apply_spectral_function, ramp, ChargeFamily, DensityMatrix, HermitianOperator};
use crate::random::{random_pure, substream};

/// `max_j (1 - lambda_min(B^dagger Pi_j B))`: the smallest `delta` such that
/// every state supported in `M` has window weight at least `1 - delta` for
/// every charge.
pub fn condition1_defect(m: &Subspace, family: &ChargeFamily, targets: &TargetValues, eta: f64) -> Result<f64> {
    check_subspace(m, family)?;
    let windows = family_windows(family, targets, m.copies, eta)?;
    let mut worst: f64 = 0.0;
    for w in &windows {
        let lmin = if w.empty {
            0.0
        } else {
            let x = w.basis.adjoint() * &m.basis;
            linalg::min_eigenvalue(&linalg::hermitian_part(&(x.adjoint() * &x)))
        };
        worst = worst.max(1.0 - lmin);
    }
    Ok(worst.clamp(0.0, 1.0))
}

/// Bounds on `eps* = max { 1 - Tr(omega P) : Tr(omega Pi'_j) >= 1 - delta' for all j }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition2Bounds {
    /// Value achieved by an explicit feasible state; 0 when none was found.
    pub primal_lower: f64,
    /// Weak-duality bound.
    pub dual_upper: f64,
    /// Multipliers attaining `dual_upper`.
    pub lambda: Vec<f64>,
    /// Whether the primal search found a feasible state.
    pub primal_feasible: bool,
}

/// `(I - P) + sum_j lambda_j (Pi_j - (1 - delta') I)`.
fn dual_matrix(complement: &CMatrix, windows: &[WindowProjector], lambda: &[f64], delta_prime: f64) -> CMatrix {
    let n = complement.nrows();
    let mut m = complement.clone();
    let shift: f64 = lambda.iter().sum::<f64>() * (1.0 - delta_prime);
    for (w, &l) in windows.iter().zip(lambda) {
        if l != 0.0 {
            m += w.projector.matrix() * linalg::real(l);
        }
    }
    m -= linalg::identity(n) * linalg::real(shift);
    m
}

fn dual_value(complement: &CMatrix, windows: &[WindowProjector], lambda: &[f64], delta_prime: f64) -> f64 {
    linalg::max_eigenvalue(&dual_matrix(complement, windows, lambda, delta_prime))
}

/// Multiplier values tried in the uniform and first coordinate passes:
/// zero and `10^(k/4)` for `k = -12..=12`.
fn base_grid() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((-12..=12).map(|k| 10f64.powf(k as f64 / 4.0)))
        .collect()
}

fn minimize_dual(complement: &CMatrix, windows: &[WindowProjector], delta_prime: f64) -> (f64, Vec<f64>) {
    let c = windows.len();
    let grid = base_grid();
    let mut best_lambda = vec![0.0; c];
    let mut best = dual_value(complement, windows, &best_lambda, delta_prime);

    for &g in &grid {
        let lam = vec![g; c];
        let v = dual_value(complement, windows, &lam, delta_prime);
        if v < best {
            best = v;
            best_lambda = lam;
        }
    }

    // Coordinate refinement with geometrically shrinking log-steps.
    for pass in 0..3 {
        let step = 10f64.powf(0.25 / 2f64.powi(pass + 1));
        for j in 0..c {
            let cur = best_lambda[j];
            let mut candidates = vec![0.0];
            if pass == 0 {
                candidates.extend_from_slice(&grid);
            }
            if cur > 0.0 {
                for k in -4..=4 {
                    candidates.push(cur * step.powi(k));
                }
            }
            for cand in candidates {
                let mut lam = best_lambda.clone();
                lam[j] = cand;
                let v = dual_value(complement, windows, &lam, delta_prime);
                if v < best {
                    best = v;
                    best_lambda = lam;
                }
            }
        }
    }
    (best, best_lambda)
}

/// Window weights and outside weight of a pure state.
struct Moments {
    window: Vec<f64>,
    outside: f64,
}

fn moments(psi: &CVector, basis: &CMatrix, windows: &[WindowProjector]) -> Moments {
    let inside = (basis.adjoint() * psi).norm_squared();
    Moments {
        window: windows
            .iter()
            .map(|w| if w.empty { 0.0 } else { (w.basis.adjoint() * psi).norm_squared().clamp(0.0, 1.0) })
            .collect(),
        outside: (1.0 - inside).clamp(0.0, 1.0),
    }
}

fn feasible(m: &Moments, floor: f64) -> bool {
    m.window.iter().all(|&a| a >= floor)
}

/// Largest `t` in `[0, 1]` keeping `(1-t) a + t b` feasible.
fn max_mixing(a: &Moments, b: &Moments, floor: f64) -> f64 {
    let mut t: f64 = 1.0;
    for (&x, &y) in a.window.iter().zip(&b.window) {
        if y < floor {
            let room = x - floor;
            let drop = x - y;
            t = t.min(if drop > 0.0 { (room / drop).max(0.0) } else { 1.0 });
        }
    }
    t
}

/// Greedy convex mixing of candidate pure states: start from the best
/// feasible candidate and repeatedly mix in any candidate that raises the
/// outside weight while keeping every window constraint.
fn primal_search(cands: &[Moments], floor: f64) -> Option<f64> {
    let start = cands
        .iter()
        .filter(|m| feasible(m, floor))
        .max_by(|a, b| a.outside.total_cmp(&b.outside))?;
    let mut cur = Moments {
        window: start.window.clone(),
        outside: start.outside,
    };
    for _ in 0..3 {
        let mut improved = false;
        for b in cands {
            if b.outside <= cur.outside {
                continue;
            }
            let t = max_mixing(&cur, b, floor);
            if t <= 0.0 {
                continue;
            }
            let next_out = (1.0 - t) * cur.outside + t * b.outside;
            if next_out > cur.outside {
                for (x, &y) in cur.window.iter_mut().zip(&b.window) {
                    *x = (1.0 - t) * *x + t * y;
                }
                cur.outside = next_out;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Some(cur.outside)
}

/// Number of seeded random pure states added to the primal candidates.
const RANDOM_CANDIDATES: usize = 32;
/// Number of top eigenvectors of the optimal dual matrix used as candidates.
const DUAL_CANDIDATES: usize = 8;

/// Primal and dual bounds on the smallest `epsilon` certifying condition 2
/// at window width `eta_prime` and tolerance `delta_prime`.
///
/// The dual side uses weak duality: for every `lambda >= 0`,
/// `eps* <= lambda_max[(I - P) + sum_j lambda_j (Pi'_j - (1 - delta') I)]`.
/// `lambda` is chosen by a uniform scan followed by coordinate descent. The
/// primal side mixes joint eigenvectors, top dual eigenvectors and seeded
/// random states.
pub fn condition2_defect(
    m: &Subspace,
    family: &ChargeFamily,
    targets: &TargetValues,
    eta_prime: f64,
    delta_prime: f64,
) -> Result<Condition2Bounds> {
    check_subspace(m, family)?;
    if !(0.0..=1.0).contains(&delta_prime) {
        return Err(Error::InvalidArgument(format!("delta' must lie in [0, 1], got {delta_prime}")));
    }
    let windows = family_windows(family, targets, m.copies, eta_prime)?;
    let n = m.total_dim();
    let p = m.projector();
    let complement = linalg::hermitian_part(&(linalg::identity(n) - &p));

    let (dual_upper, lambda) = minimize_dual(&complement, &windows, delta_prime);

    let mut generic = &p * linalg::real(std::f64::consts::PI);
    for (j, w) in windows.iter().enumerate() {
        generic += w.projector.matrix() * linalg::real(1.0 / (j as f64 + std::f64::consts::E));
    }
    let joint = eigh(&linalg::hermitian_part(&generic)).vectors;
    let dual_vecs = eigh(&dual_matrix(&complement, &windows, &lambda, delta_prime)).vectors;

    let mut cands: Vec<Moments> = Vec::new();
    for k in 0..n {
        cands.push(moments(&joint.column(k).into_owned(), &m.basis, &windows));
    }
    for k in 0..DUAL_CANDIDATES.min(n) {
        cands.push(moments(&dual_vecs.column(n - 1 - k).into_owned(), &m.basis, &windows));
    }
    let mut rng = substream(0xC0D2, m.copies as u64);
    for _ in 0..RANDOM_CANDIDATES {
        cands.push(moments(&random_pure(n, &mut rng), &m.basis, &windows));
    }
    let floor = 1.0 - delta_prime;
    let primal = primal_search(&cands, floor);

    Ok(Condition2Bounds {
        primal_lower: primal.unwrap_or(0.0).clamp(0.0, 1.0),
        dual_upper: dual_upper.clamp(0.0, 1.0),
        lambda,
        primal_feasible: primal.is_some(),
    })
}

/// Concentration of the averaged charges in the product NATS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingCheck {
    /// `1 - Tr(gamma^{⊗N} Pi_j^eta)` per charge.
    pub lhs: Vec<f64>,
    /// `2 exp(-2 eta^2 N)`.
    pub rhs: f64,
}

impl HoeffdingCheck {
    pub fn holds(&self) -> bool {
        self.lhs.iter().all(|&l| l <= self.rhs)
    }
}

/// Fits the NATS to `targets` and evaluates [`hoeffding_check_with_state`].
pub fn hoeffding_check(family: &ChargeFamily, targets: &TargetValues, copies: usize, eta: f64) -> Result<HoeffdingCheck> {
    let params = fit_potentials(family, targets, 1e-10)?;
    let gamma = build_nats(family, &params.mu)?;
    hoeffding_check_with_state(family, targets, &gamma, copies, eta)
}

/// Exact window weights of `gamma^{⊗N}` against the Hoeffding bound.
pub fn hoeffding_check_with_state(
    family: &ChargeFamily,
    targets: &TargetValues,
    gamma: &DensityMatrix,
    copies: usize,
    eta: f64,
) -> Result<HoeffdingCheck> {
    if gamma.dim() != family.site_dim() {
        return Err(Error::DimensionMismatch {
            expected: family.site_dim(),
            found: gamma.dim(),
        });
    }
    let product = gamma.tensor_power(copies)?;
    let windows = family_windows(family, targets, copies, eta)?;
    let lhs = windows
        .iter()
        .map(|w| {
            if w.empty {
                return 1.0;
            }
            let x = w.basis.adjoint() * product.matrix() * &w.basis;
            let inside: f64 = x.diagonal().iter().map(|z| z.re).sum();
            (1.0 - inside).max(0.0)
        })
        .collect();
    Ok(HoeffdingCheck {
        lhs,
        rhs: 2.0 * (-2.0 * eta * eta * copies as f64).exp(),
    })
}

/// Ramp-mollified window difference between an operator and its approximant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierGap {
    /// `||f(Ybar - vI) - f(Qbar - vI)||` in spectral norm.
    pub gap: f64,
    /// Lipschitz constant `1 / (eta1 - eta0)` of the ramp.
    pub lipschitz: f64,
    /// `lipschitz * ||Qbar - Ybar||`, for comparison.
    pub scalar_bound: f64,
}

/// Applies the ramp equal to 1 on `[-eta0, eta0]` and 0 outside
/// `[-eta1, eta1]` to `Qbar - vI` and `Ybar - vI` and compares.
pub fn mollifier_gap_check(
    qbar: &HermitianOperator,
    ybar: &HermitianOperator,
    v: f64,
    eta0: f64,
    eta1: f64,
) -> Result<MollifierGap> {
    if !(eta0 > 0.0 && eta1 > eta0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < eta0 < eta1, got eta0 = {eta0}, eta1 = {eta1}"
        )));
    }
    if qbar.dim() != ybar.dim() {
        return Err(Error::DimensionMismatch {
            expected: qbar.dim(),
            found: ybar.dim(),
        });
    }
    let f = |x: f64| ramp(x - v, eta0, eta1);
    let fq = apply_spectral_function(qbar, f);
    let fy = apply_spectral_function(ybar, f);
    let gap = linalg::op_norm_hermitian(&(fy.matrix() - fq.matrix()));
    let lipschitz = 1.0 / (eta1 - eta0);
    let diff = linalg::op_norm_hermitian(&(qbar.matrix() - ybar.matrix()));
    Ok(MollifierGap {
        gap,
        lipschitz,
        scalar_bound: lipschitz * diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcanonical::{average_charge, build_amc, commuting_approximants, Provenance, SubspaceParams};
    use crate::random::random_hermitian;

    fn sz() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[0.5, -0.5])
    }

    fn number() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[0.0, 1.0])
    }

    fn binomial(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn commuting_construction_has_no_condition1_defect() {
        let fam = ChargeFamily::unlabeled(vec![number()]).unwrap();
        let t = TargetValues::new(vec![0.3]);
        let m = build_amc(&fam, &t, 6, 0.2).unwrap();
        assert!(condition1_defect(&m, &fam, &t, 0.2).unwrap() <= 1e-10);
    }

    #[test]
    fn full_space_defect_bounds_sampled_weight() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let t = TargetValues::new(vec![0.0]);
        let m = Subspace::full(3, 2, 0.2).unwrap();
        let defect = condition1_defect(&m, &fam, &t, 0.2).unwrap();
        let w = &family_windows(&fam, &t, 3, 0.2).unwrap()[0];
        assert_eq!(w.rank(), 6);
        let mut rng = substream(5, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let psi = random_pure(8, &mut rng);
            worst = worst.max(1.0 - (w.basis.adjoint() * psi).norm_squared());
        }
        assert!(worst <= defect + 1e-12);
        // The full space contains states orthogonal to the window.
        assert!((defect - 1.0).abs() < 1e-12);
        assert!(worst < 1.0);
    }

    #[test]
    fn one_dimensional_eigenvector_subspace() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let t = TargetValues::new(vec![0.5]);
        for (col, expected) in [(0usize, 0.0), (3, 1.0)] {
            let mut b = CMatrix::zeros(4, 1);
            b[(col, 0)] = linalg::ONE;
            let m = Subspace::new(2, 2, b, Provenance::Commuting, SubspaceParams::with_eta(0.1)).unwrap();
            let d = condition1_defect(&m, &fam, &t, 0.1).unwrap();
            assert_eq!(d, expected);
        }
    }

    #[test]
    fn condition2_on_full_space_is_zero() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let t = TargetValues::new(vec![0.0]);
        let m = Subspace::full(2, 2, 0.2).unwrap();
        let b = condition2_defect(&m, &fam, &t, 0.2, 0.05).unwrap();
        assert!(b.primal_lower.abs() < 1e-12);
        assert!(b.dual_upper.abs() < 1e-12);
    }

    #[test]
    fn condition2_commuting_matches_pinching_bound() {
        let fam = ChargeFamily::unlabeled(vec![
            HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]),
            HermitianOperator::from_real_diagonal(&[1.0, 0.0, 1.0]),
        ])
        .unwrap();
        let t = TargetValues::new(vec![1.0, 0.6]);
        let m = build_amc(&fam, &t, 3, 0.2).unwrap();
        for dp in [0.01, 0.05] {
            let b = condition2_defect(&m, &fam, &t, 0.2, dp).unwrap();
            assert!(b.dual_upper <= 2.0 * dp + 1e-8, "{b:?}");
            assert!(b.primal_lower <= b.dual_upper + 1e-8);
        }
    }

    #[test]
    fn vacuous_constraints_give_unit_defect() {
        let fam = ChargeFamily::unlabeled(vec![number()]).unwrap();
        let t = TargetValues::new(vec![0.5]);
        let m = build_amc(&fam, &t, 2, 0.1).unwrap();
        assert!(m.dim() < 4);
        let b = condition2_defect(&m, &fam, &t, 0.1, 1.0).unwrap();
        assert!((b.primal_lower - 1.0).abs() < 1e-12);
        assert!((b.dual_upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hoeffding_full_window_has_zero_lhs() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let t = TargetValues::new(vec![-0.1]);
        let h = hoeffding_check(&fam, &t, 4, 2.0).unwrap();
        assert!(h.lhs[0].abs() < 1e-12);
    }

    #[test]
    fn hoeffding_matches_binomial_tail() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let beta = 0.8;
        let gamma = build_nats(&fam, &[beta]).unwrap();
        let p_up = gamma.matrix()[(0, 0)].re;
        let v = p_up - 0.5;
        let t = TargetValues::new(vec![v]);
        let n = 8u64;
        let eta = 0.25;
        let h = hoeffding_check_with_state(&fam, &t, &gamma, n as usize, eta).unwrap();
        // Average of k up-spins among n is k/n - 1/2.
        let mut inside = 0.0;
        for k in 0..=n {
            let avg = k as f64 / n as f64 - 0.5;
            if (avg - v).abs() <= eta + 1e-12 {
                inside += binomial(n, k) * p_up.powi(k as i32) * (1.0 - p_up).powi((n - k) as i32);
            }
        }
        assert!((h.lhs[0] - (1.0 - inside)).abs() < 1e-12);
        assert!(h.holds());
    }

    #[test]
    fn hoeffding_single_copy_is_vacuous() {
        let fam = ChargeFamily::unlabeled(vec![sz()]).unwrap();
        let h = hoeffding_check(&fam, &TargetValues::new(vec![0.0]), 1, 0.01).unwrap();
        assert!(h.rhs >= 1.0);
        assert!(h.lhs[0] <= h.rhs.min(1.0));
    }

    #[test]
    fn mollifier_gap_examples() {
        let q = HermitianOperator::new(random_hermitian(4, &mut substream(3, 0))).unwrap();
        let g = mollifier_gap_check(&q, &q, 0.0, 0.1, 0.3).unwrap();
        assert!(g.gap < 1e-12);

        let a = HermitianOperator::from_real_diagonal(&[0.0, 0.12, 0.2, 0.5]);
        let eps = 0.01;
        let b = HermitianOperator::from_real_diagonal(&[eps, 0.12 + eps, 0.2 - eps, 0.5]);
        let g = mollifier_gap_check(&a, &b, 0.0, 0.1, 0.3).unwrap();
        assert!(g.gap <= g.lipschitz * eps + 1e-15);
        assert!(g.gap <= g.scalar_bound + 1e-15);

        assert!(mollifier_gap_check(&a, &b, 0.0, 0.3, 0.1).is_err());
    }

    #[test]
    fn mollifier_gap_on_spin_approximants_is_finite() {
        let spin = crate::testing::spin_family();
        let qbars: Vec<HermitianOperator> =
            spin.charges().iter().map(|q| average_charge(q, 4).unwrap()).collect();
        let approx = commuting_approximants(&qbars).unwrap();
        let g = mollifier_gap_check(&qbars[2], &approx.ybars[2], 0.0, 0.1, 0.25).unwrap();
        assert!(g.gap.is_finite() && g.gap >= 0.0);
    }
}
