//! Charge-conserving unitaries: membership test, sampling from the
//! commutant of a set of totals, and the reference-frame lift.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::qops::HermitianOperator;
use crate::random::random_hermitian;

/// Unitarity defect above which an input is rejected.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Relative tolerance that identifies joint eigenvalues of commuting totals.
const JOINT_TOL: f64 = 1e-9;
/// Relative eigenvalue threshold of the commutant superoperator's null space.
const NULL_TOL: f64 = 1e-10;

/// Commutator norms of a unitary with each total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeUnitaryCheck {
    pub ok: bool,
    /// `||[U, A_j]||` in spectral norm, one per total.
    pub defects: Vec<f64>,
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    if !u.is_square() {
        return Err(Error::InvalidArgument("unitary must be square".into()));
    }
    let defect = linalg::unitarity_defect(u);
    if defect > UNITARITY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    Ok(())
}

fn check_totals(totals: &[HermitianOperator], dim: usize) -> Result<()> {
    for a in totals {
        if a.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.dim(),
            });
        }
    }
    Ok(())
}

/// Whether `u` commutes with every total to within `tol`. The energy is the
/// first total by convention, so it is covered by the same test.
pub fn is_free_unitary(u: &CMatrix, totals: &[HermitianOperator], tol: f64) -> Result<FreeUnitaryCheck> {
    check_unitary(u)?;
    check_totals(totals, u.nrows())?;
    let defects: Vec<f64> = totals
        .iter()
        .map(|a| linalg::op_norm(&linalg::commutator(u, a.matrix())))
        .collect();
    Ok(FreeUnitaryCheck {
        ok: defects.iter().all(|d| *d <= tol),
        defects,
    })
}

#[derive(Debug, Clone)]
enum Commutant {
    Unconstrained,
    /// Joint eigenbasis and the sector label of each column.
    Blocks { basis: CMatrix, sector: Vec<usize> },
    /// Orthonormal Hermitian matrices spanning the commutant.
    Span(Vec<CMatrix>),
}

/// Orthogonal projection of Hermitian matrices onto the commutant of a set
/// of totals.
#[derive(Debug, Clone)]
pub struct CommutantProjector {
    dim: usize,
    kind: Commutant,
}

fn joint_blocks(totals: &[HermitianOperator], dim: usize) -> Option<(CMatrix, Vec<usize>)> {
    let weights: Vec<f64> = (0..totals.len())
        .map(|j| 1.0 + (j as f64 + 2.0).sqrt() * 0.618_033_988_749_895 + 0.1 * (j as f64 + 1.0).ln())
        .collect();
    let mut generic = CMatrix::zeros(dim, dim);
    for (w, a) in weights.iter().zip(totals) {
        generic += a.matrix() * c(*w, 0.0);
    }
    let basis = linalg::eigh(&generic).vectors;
    let scale = totals.iter().fold(1.0_f64, |m, a| m.max(a.op_norm()));
    let mut labels: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for k in 0..dim {
        let v = basis.column(k).into_owned();
        let mut tuple = Vec::with_capacity(totals.len());
        for a in totals {
            let av = a.matrix() * &v;
            let val = (v.adjoint() * &av)[(0, 0)].re;
            if (av - &v * c(val, 0.0)).norm() > JOINT_TOL * scale * 1e2 {
                return None;
            }
            tuple.push(val);
        }
        labels.push(tuple);
    }
    let mut reps: Vec<Vec<f64>> = Vec::new();
    let mut sector = Vec::with_capacity(dim);
    for t in &labels {
        let found = reps
            .iter()
            .position(|r| r.iter().zip(t).all(|(x, y)| (x - y).abs() <= JOINT_TOL * scale));
        match found {
            Some(s) => sector.push(s),
            None => {
                sector.push(reps.len());
                reps.push(t.clone());
            }
        }
    }
    Some((basis, sector))
}

/// Real orthonormal basis of the Hermitian `dim x dim` matrices under the
/// Hilbert–Schmidt inner product.
fn hermitian_basis(dim: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let mut e = CMatrix::zeros(dim, dim);
        e[(i, i)] = c(1.0, 0.0);
        out.push(e);
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut e = CMatrix::zeros(dim, dim);
            e[(i, j)] = c(s, 0.0);
            e[(j, i)] = c(s, 0.0);
            out.push(e);
            let mut f = CMatrix::zeros(dim, dim);
            f[(i, j)] = c(0.0, -s);
            f[(j, i)] = c(0.0, s);
            out.push(f);
        }
    }
    out
}

fn commutant_span(totals: &[HermitianOperator], dim: usize) -> Vec<CMatrix> {
    let basis = hermitian_basis(dim);
    let images: Vec<CMatrix> = basis
        .iter()
        .map(|e| {
            let mut acc = CMatrix::zeros(dim, dim);
            for a in totals {
                let inner = linalg::commutator(a.matrix(), e);
                acc += linalg::commutator(a.matrix(), &inner);
            }
            acc
        })
        .collect();
    let n = basis.len();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = linalg::trace_product(&basis[i], &images[j]).re;
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    let se = SymmetricEigen::new(l);
    let top = se.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut span = Vec::new();
    for k in 0..n {
        if se.eigenvalues[k].abs() <= NULL_TOL * top {
            let mut x = CMatrix::zeros(dim, dim);
            for (i, e) in basis.iter().enumerate() {
                let w = se.eigenvectors[(i, k)];
                if w != 0.0 {
                    x += e * c(w, 0.0);
                }
            }
            span.push(x);
        }
    }
    span
}

impl CommutantProjector {
    /// Commuting totals are block-diagonalized jointly; otherwise the null
    /// space of `X -> sum_j [A_j, [A_j, X]]` is computed. An empty list
    /// imposes no constraint.
    pub fn new(totals: &[HermitianOperator], dim: usize) -> Result<Self> {
        check_totals(totals, dim)?;
        if totals.is_empty() {
            return Ok(Self {
                dim,
                kind: Commutant::Unconstrained,
            });
        }
        let commuting = totals.iter().enumerate().all(|(i, a)| {
            totals[i + 1..]
                .iter()
                .all(|b| a.commutes_with(b, 1e-12 * a.op_norm().max(1.0) * b.op_norm().max(1.0)))
        });
        if commuting {
            if let Some((basis, sector)) = joint_blocks(totals, dim) {
                return Ok(Self {
                    dim,
                    kind: Commutant::Blocks { basis, sector },
                });
            }
        }
        Ok(Self {
            dim,
            kind: Commutant::Span(commutant_span(totals, dim)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Real dimension of the commuting Hermitian matrices.
    pub fn commutant_dim(&self) -> usize {
        match &self.kind {
            Commutant::Unconstrained => self.dim * self.dim,
            Commutant::Blocks { sector, .. } => {
                let sectors = sector.iter().copied().max().map_or(0, |m| m + 1);
                (0..sectors)
                    .map(|s| sector.iter().filter(|&&x| x == s).count().pow(2))
                    .sum()
            }
            Commutant::Span(s) => s.len(),
        }
    }

    /// Hilbert–Schmidt orthogonal projection of a Hermitian `g`.
    pub fn project(&self, g: &CMatrix) -> CMatrix {
        match &self.kind {
            Commutant::Unconstrained => g.clone(),
            Commutant::Blocks { basis, sector } => {
                let mut inner = basis.adjoint() * g * basis;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        if sector[i] != sector[j] {
                            inner[(i, j)] = linalg::ZERO;
                        }
                    }
                }
                linalg::hermitian_part(&(basis * inner * basis.adjoint()))
            }
            Commutant::Span(span) => {
                let mut out = CMatrix::zeros(self.dim, self.dim);
                for x in span {
                    let w = linalg::trace_product(x, g).re;
                    out += x * c(w, 0.0);
                }
                linalg::hermitian_part(&out)
            }
        }
    }

    /// `exp(i G)` for a GUE sample `G` projected onto the commutant.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let g = random_hermitian(self.dim, rng);
        linalg::exp_i_hermitian(&self.project(&g))
    }
}

/// One random unitary commuting with every total.
pub fn random_free_unitary<R: Rng + ?Sized>(totals: &[HermitianOperator], dim: usize, rng: &mut R) -> Result<CMatrix> {
    Ok(CommutantProjector::new(totals, dim)?.sample(rng))
}

/// `sum_g |g><g| ⊗ V_S(g) U V_S(g)^dagger` on register ⊗ system. The register
/// basis is indexed by the group elements in the order of `reps`.
pub fn reference_frame_unitary(u: &CMatrix, reps: &[CMatrix]) -> Result<CMatrix> {
    check_unitary(u)?;
    if reps.is_empty() {
        return Err(Error::RepresentationMismatch("no group elements".into()));
    }
    let d = u.nrows();
    for (g, v) in reps.iter().enumerate() {
        if v.nrows() != d || v.ncols() != d {
            return Err(Error::RepresentationMismatch(format!(
                "element {g} acts on dimension {}x{}, system has {d}",
                v.nrows(),
                v.ncols()
            )));
        }
        let defect = linalg::unitarity_defect(v);
        if defect > UNITARITY_TOL {
            return Err(Error::RepresentationMismatch(format!(
                "element {g} is not unitary (defect {defect:.3e})"
            )));
        }
    }
    let k = reps.len();
    let mut out = CMatrix::zeros(k * d, k * d);
    for (g, v) in reps.iter().enumerate() {
        let block = v * u * v.adjoint();
        out.view_mut((g * d, g * d), (d, d)).copy_from(&block);
    }
    Ok(out)
}

/// `max_g ||(V_W(g) ⊗ V_S(g)) U (V_W(g) ⊗ V_S(g))^dagger - U||`.
pub fn covariance_defect(u: &CMatrix, register_reps: &[CMatrix], system_reps: &[CMatrix]) -> Result<f64> {
    if register_reps.len() != system_reps.len() {
        return Err(Error::RepresentationMismatch(format!(
            "{} register elements, {} system elements",
            register_reps.len(),
            system_reps.len()
        )));
    }
    let mut worst = 0.0_f64;
    for (w, s) in register_reps.iter().zip(system_reps) {
        let v = linalg::kron(w, s);
        if v.nrows() != u.nrows() {
            return Err(Error::DimensionMismatch {
                expected: u.nrows(),
                found: v.nrows(),
            });
        }
        worst = worst.max(linalg::op_norm(&(&v * u * v.adjoint() - u)));
    }
    Ok(worst)
}

/// Fraction of the Hilbert–Schmidt weight of `u` that connects different
/// eigenspaces of `charge`: `sum_{a != b} ||P_a U P_b||_F^2 / dim`.
pub fn sector_leakage(u: &CMatrix, charge: &HermitianOperator) -> Result<f64> {
    if u.nrows() != charge.dim() {
        return Err(Error::DimensionMismatch {
            expected: charge.dim(),
            found: u.nrows(),
        });
    }
    let spec = charge.spectrum();
    let scale = charge.op_norm().max(1.0);
    let inner = spec.vectors.adjoint() * u * &spec.vectors;
    let n = u.nrows();
    let mut leak = 0.0;
    for i in 0..n {
        for j in 0..n {
            if (spec.values[i] - spec.values[j]).abs() > JOINT_TOL * scale {
                leak += inner[(i, j)].norm_sqr();
            }
        }
    }
    Ok(leak / n as f64)
}

/// The cyclic group of order `k` standing in for U(1): element `m` is the
/// phase `2 pi m / k`.
#[derive(Debug, Clone)]
pub struct DiscreteU1 {
    pub order: usize,
}

impl DiscreteU1 {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument("group order must be at least 2".into()));
        }
        Ok(Self { order })
    }

    pub fn phase(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.order as f64
    }

    /// `exp(-i phi_m J)` for each element.
    pub fn system_reps(&self, j: &HermitianOperator) -> Vec<CMatrix> {
        (0..self.order)
            .map(|m| linalg::exp_i_hermitian(&(j.matrix() * c(-self.phase(m), 0.0))))
            .collect()
    }

    /// Regular representation on the register: `T^m`, `T|n> = |n+1 mod k>`.
    pub fn register_reps(&self) -> Vec<CMatrix> {
        let k = self.order;
        (0..k)
            .map(|m| {
                let mut t = CMatrix::zeros(k, k);
                for n in 0..k {
                    t[((n + m) % k, n)] = c(1.0, 0.0);
                }
                t
            })
            .collect()
    }

    /// Register charge with `T = exp(-i (2 pi / k) J_W)`: Fourier modes
    /// `f_n(m) = exp(2 pi i n m / k) / sqrt k` carry charge `n` folded into
    /// `(-k/2, k/2]`.
    pub fn register_charge(&self) -> HermitianOperator {
        let k = self.order;
        let norm = 1.0 / (k as f64).sqrt();
        let mut out = CMatrix::zeros(k, k);
        for n in 0..k {
            let charge = if n <= k / 2 { n as f64 } else { n as f64 - k as f64 };
            let f = crate::linalg::CVector::from_fn(k, |m, _| {
                c(0.0, 2.0 * PI * (n * m) as f64 / k as f64).exp() * norm
            });
            out += &f * f.adjoint() * c(charge, 0.0);
        }
        HermitianOperator::from_hermitian(linalg::hermitian_part(&out))
    }

    /// `J_W ⊗ I + I ⊗ J_S`.
    pub fn total_charge(&self, j: &HermitianOperator) -> HermitianOperator {
        let jw = self.register_charge();
        let m = linalg::kron(jw.matrix(), &linalg::identity(j.dim()))
            + linalg::kron(&linalg::identity(self.order), j.matrix());
        HermitianOperator::from_hermitian(linalg::hermitian_part(&m))
    }
}
