//! Exactly commuting approximants of a set of Hermitian operators by joint
//! approximate diagonalization (complex Jacobi pair rotations).

use nalgebra::{Matrix3, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c, eigh, op_norm, CMatrix};
use crate::qops::HermitianOperator;
use crate::random::substream;

/// Rotations stop when a sweep lowers the off-diagonal mass by less than this.
pub const SWEEP_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 10_000;
/// Number of seeded random starting bases tried in addition to the fixed ones.
pub const RANDOM_STARTS: usize = 6;

/// Output of [`commuting_approximants`].
#[derive(Debug, Clone)]
pub struct Approximants {
    /// Operators diagonal in `basis`.
    pub ybars: Vec<HermitianOperator>,
    /// Joint eigenbasis (columns).
    pub basis: CMatrix,
    /// `max_j ||Qbar_j - Ybar_j||` in spectral norm.
    pub eps_num: f64,
    /// Per-operator spectral-norm errors.
    pub errors: Vec<f64>,
    /// Sum of squared off-diagonal magnitudes at the end.
    pub objective: f64,
    pub sweeps: usize,
    /// False when the sweep cap was reached; the best basis is still returned.
    pub converged: bool,
}

impl Approximants {
    /// Diagonal entries of `Ybar_j` in the joint basis.
    pub fn joint_eigenvalues(&self, j: usize) -> Vec<f64> {
        let b = &self.basis;
        let m = b.adjoint() * self.ybars[j].matrix() * b;
        m.diagonal().iter().map(|z| z.re).collect()
    }

    /// Largest spectral-norm commutator among all pairs of approximants.
    pub fn max_commutator(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.ybars.len() {
            for j in (i + 1)..self.ybars.len() {
                let cm = linalg::commutator(self.ybars[i].matrix(), self.ybars[j].matrix());
                worst = worst.max(op_norm(&cm));
            }
        }
        worst
    }
}

fn off_diagonal_mass(ops: &[CMatrix]) -> f64 {
    let mut acc = 0.0;
    for a in ops {
        let n = a.nrows();
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    acc += a[(i, j)].norm_sqr();
                }
            }
        }
    }
    acc
}

struct Run {
    basis: CMatrix,
    rotated: Vec<CMatrix>,
    objective: f64,
    sweeps: usize,
    converged: bool,
}

fn jacobi(qbars: &[CMatrix], start: CMatrix) -> Run {
    let n = start.nrows();
    let mut v = start;
    let mut ops: Vec<CMatrix> = qbars.iter().map(|q| v.adjoint() * q * &v).collect();
    let mut prev = off_diagonal_mass(&ops);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut g = Matrix3::<f64>::zeros();
                for a in &ops {
                    let apq = a[(p, q)];
                    let h = [a[(p, p)].re - a[(q, q)].re, 2.0 * apq.re, 2.0 * apq.im];
                    for r in 0..3 {
                        for s in 0..3 {
                            g[(r, s)] += h[r] * h[s];
                        }
                    }
                }
                let se = SymmetricEigen::new(g);
                let top = se.eigenvalues.imax();
                let mut e = se.eigenvectors.column(top).into_owned();
                if e[0] < 0.0 {
                    e = -e;
                }
                let cs = ((e[0] + 1.0) / 2.0).sqrt();
                let sn = c(e[1], -e[2]) / (2.0 * cs);
                if sn.norm() < 1e-15 {
                    continue;
                }
                let csc = c(cs, 0.0);
                // R = [[c, -conj(s)], [s, c]]; A <- R^dagger A R on rows/cols p, q.
                for a in ops.iter_mut() {
                    for i in 0..n {
                        let xp = a[(i, p)];
                        let xq = a[(i, q)];
                        a[(i, p)] = xp * csc + xq * sn;
                        a[(i, q)] = -xp * sn.conj() + xq * csc;
                    }
                    for j in 0..n {
                        let yp = a[(p, j)];
                        let yq = a[(q, j)];
                        a[(p, j)] = csc * yp + sn.conj() * yq;
                        a[(q, j)] = -sn * yp + csc * yq;
                    }
                }
                for i in 0..n {
                    let xp = v[(i, p)];
                    let xq = v[(i, q)];
                    v[(i, p)] = xp * csc + xq * sn;
                    v[(i, q)] = -xp * sn.conj() + xq * csc;
                }
            }
        }
        let cur = off_diagonal_mass(&ops);
        if prev - cur < SWEEP_TOL {
            converged = true;
            prev = cur;
            break;
        }
        prev = cur;
    }
    Run {
        basis: v,
        rotated: ops,
        objective: prev,
        sweeps,
        converged,
    }
}

fn finish(qbars: &[HermitianOperator], run: Run) -> Approximants {
    let b = &run.basis;
    let mut ybars = Vec::with_capacity(qbars.len());
    let mut errors = Vec::with_capacity(qbars.len());
    for (q, a) in qbars.iter().zip(&run.rotated) {
        let d: Vec<f64> = a.diagonal().iter().map(|z| z.re).collect();
        let y = linalg::hermitian_part(&(b * linalg::from_real_diagonal(&d) * b.adjoint()));
        errors.push(linalg::op_norm_hermitian(&(q.matrix() - &y)));
        ybars.push(HermitianOperator::from_hermitian(y));
    }
    let eps_num = errors.iter().copied().fold(0.0, f64::max);
    Approximants {
        ybars,
        basis: run.basis,
        eps_num,
        errors,
        objective: run.objective,
        sweeps: run.sweeps,
        converged: run.converged,
    }
}

/// Starting bases: the identity, the eigenbasis of the norm-weighted sum of
/// the inputs, and eigenbases of seeded random combinations.
fn starting_bases(qbars: &[HermitianOperator]) -> Vec<CMatrix> {
    let n = qbars[0].dim();
    let mut starts = vec![linalg::identity(n)];
    let mut sum = CMatrix::zeros(n, n);
    for q in qbars {
        let s = q.op_norm();
        if s > 0.0 {
            sum += q.matrix() / c(s, 0.0);
        }
    }
    starts.push(eigh(&sum).vectors);
    for k in 0..RANDOM_STARTS {
        let mut rng = substream(0x4a41_4400 + n as u64, k as u64);
        let mut comb = CMatrix::zeros(n, n);
        for q in qbars {
            let w: f64 = rng.sample(StandardNormal);
            comb += q.matrix() * c(w, 0.0);
        }
        starts.push(eigh(&comb).vectors);
    }
    starts
}

/// Jointly diagonal `Ybar_j` close to `Qbar_j`.
///
/// Jacobi sweeps minimize the summed squared off-diagonal magnitude from
/// several deterministic starting bases. Among runs that reach the lowest
/// objective (within a relative `1e-9`) the one with the smallest spectral
/// error is kept. Inputs that already commute are returned unchanged up to
/// rounding.
pub fn commuting_approximants(qbars: &[HermitianOperator]) -> Result<Approximants> {
    let first = qbars
        .first()
        .ok_or_else(|| Error::InvalidArgument("no operators to approximate".into()))?;
    let n = first.dim();
    for q in qbars {
        if q.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.dim(),
            });
        }
    }
    let mats: Vec<CMatrix> = qbars.iter().map(|q| q.matrix().clone()).collect();
    let runs: Vec<Approximants> = starting_bases(qbars)
        .into_iter()
        .map(|s| finish(qbars, jacobi(&mats, s)))
        .collect();
    let best_obj = runs.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    let cutoff = best_obj + 1e-9 * best_obj.abs().max(1e-12);
    let best = runs
        .into_iter()
        .filter(|r| r.objective <= cutoff)
        .min_by(|a, b| a.eps_num.total_cmp(&b.eps_num))
        .expect("at least one run reaches the best objective");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcanonical::average_charge;
    use crate::random::{random_hermitian, random_unitary};

    fn spin() -> Vec<HermitianOperator> {
        let jx = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        let jy = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)]);
        let jz = linalg::from_real_diagonal(&[0.5, -0.5]);
        [jx, jy, jz]
            .into_iter()
            .map(|m| HermitianOperator::new(m).unwrap())
            .collect()
    }

    #[test]
    fn commuting_inputs_are_reproduced() {
        let u = random_unitary(5, &mut substream(3, 0));
        let ops: Vec<HermitianOperator> = [[1.0, 2.0, 3.0, 4.0, 5.0], [0.0, 1.0, 0.0, 1.0, 2.0]]
            .iter()
            .map(|d| {
                HermitianOperator::new(&u * linalg::from_real_diagonal(d) * u.adjoint()).unwrap()
            })
            .collect();
        let a = commuting_approximants(&ops).unwrap();
        assert!(a.eps_num <= 1e-10, "eps_num {}", a.eps_num);
        assert!(a.max_commutator() <= 1e-10);
    }

    #[test]
    fn single_operator_is_itself() {
        let h = HermitianOperator::new(random_hermitian(4, &mut substream(1, 0))).unwrap();
        let a = commuting_approximants(std::slice::from_ref(&h)).unwrap();
        assert!(a.eps_num <= 1e-12);
        assert!(linalg::frobenius_norm(&(a.ybars[0].matrix() - h.matrix())) < 1e-12);
    }

    #[test]
    fn approximants_commute_exactly() {
        let qs: Vec<HermitianOperator> = spin().iter().map(|q| average_charge(q, 3).unwrap()).collect();
        let a = commuting_approximants(&qs).unwrap();
        assert!(a.max_commutator() <= 1e-10);
        assert!(a.converged);
        assert!(a.eps_num > 0.0 && a.eps_num < 0.5);
    }

    #[test]
    fn rejects_mixed_dimensions() {
        let a = HermitianOperator::identity(2);
        let b = HermitianOperator::identity(3);
        assert!(matches!(
            commuting_approximants(&[a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
