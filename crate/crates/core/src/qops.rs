//! Dense Hermitian operators, density matrices and the spectral kernel:
//! tensor embeddings, partial traces, entropies and distances.
//!
//! All logarithms are natural; entropies are in nats.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{
    self, anti_hermitian_defect, checked_power_dim, eigh, hermitian_part, CMatrix, CVector, Eigh,
    ZERO,
};

/// Largest anti-Hermitian component tolerated (and removed) at construction.
pub const HERMITICITY_REJECT: f64 = 1e-8;
/// Trace deviation tolerated for a density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated for a density matrix.
pub const POSITIVITY_TOL: f64 = -1e-10;
/// Weight of `rho` outside the support of `gamma` above which the relative
/// entropy is reported as infinite.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Eigenvalues of `gamma` at or below this are treated as zero.
pub const NULL_EIGENVALUE: f64 = 1e-14;
/// Floor applied to eigenvalues before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// Self-adjoint matrix with a lazily computed, cached spectrum.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: CMatrix,
    spectrum: OnceLock<Eigh>,
}

impl HermitianOperator {
    /// Symmetrizes `(m + m^dagger)/2`, rejecting inputs whose anti-Hermitian
    /// part exceeds [`HERMITICITY_REJECT`].
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("operator of dimension zero".into()));
        }
        let defect = anti_hermitian_defect(&m);
        if !(defect <= HERMITICITY_REJECT) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self::from_hermitian(hermitian_part(&m)))
    }

    /// Wraps a matrix the caller guarantees to be exactly Hermitian.
    pub(crate) fn from_hermitian(entries: CMatrix) -> Self {
        Self {
            entries,
            spectrum: OnceLock::new(),
        }
    }

    pub(crate) fn from_parts(entries: CMatrix, spectrum: Eigh) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Self { entries, spectrum: cell }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        Self::from_hermitian(linalg::from_real_diagonal(values))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_hermitian(linalg::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_hermitian(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn spectrum(&self) -> &Eigh {
        self.spectrum.get_or_init(|| eigh(&self.entries))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("non-empty operator")
    }

    /// Spectral diameter `lambda_max - lambda_min`.
    pub fn spectral_diameter(&self) -> f64 {
        self.max_eigenvalue() - self.min_eigenvalue()
    }

    pub fn op_norm(&self) -> f64 {
        self.min_eigenvalue().abs().max(self.max_eigenvalue().abs())
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.entries).re
    }

    /// Real linear combination `sum_j w_j A_j`.
    pub fn linear_combination(weights: &[f64], ops: &[HermitianOperator]) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty operator list".into()))?;
        if weights.len() != ops.len() {
            return Err(Error::DimensionMismatch {
                expected: ops.len(),
                found: weights.len(),
            });
        }
        let n = first.dim();
        let mut acc = CMatrix::zeros(n, n);
        for (w, op) in weights.iter().zip(ops) {
            if op.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: op.dim(),
                });
            }
            acc += op.matrix() * linalg::real(*w);
        }
        Ok(Self::from_hermitian(acc))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_hermitian(&self.entries * linalg::real(s))
    }

    /// `Re Tr(self * other)`.
    pub fn expectation_in(&self, other: &CMatrix) -> f64 {
        linalg::trace_product(&self.entries, other).re
    }

    pub fn commutes_with(&self, other: &HermitianOperator, tol: f64) -> bool {
        linalg::op_norm(&linalg::commutator(self.matrix(), other.matrix())) <= tol
    }
}

/// Positive semidefinite, unit-trace Hermitian operator.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: CMatrix) -> Result<Self> {
        let op = HermitianOperator::new(m)?;
        let tr = op.trace();
        if !((tr - 1.0).abs() <= TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let lmin = op.min_eigenvalue();
        if !(lmin >= POSITIVITY_TOL) {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {lmin:.3e} is negative"
            )));
        }
        Ok(Self { op })
    }

    /// Wraps a Hermitian matrix produced by an operation that preserves
    /// trace and positivity.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        Self {
            op: HermitianOperator::from_hermitian(m),
        }
    }

    pub(crate) fn from_trusted_parts(m: CMatrix, spectrum: Eigh) -> Self {
        Self {
            op: HermitianOperator::from_parts(m, spectrum),
        }
    }

    /// `|psi><psi|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = psi / linalg::real(norm);
        Ok(Self::from_trusted(&v * v.adjoint()))
    }

    /// Computational basis state `|index><index|`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = linalg::ONE;
        Ok(Self::from_trusted(m))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(linalg::identity(dim) * linalg::real(1.0 / dim as f64))
    }

    /// Diagonal state from populations (must be a probability vector).
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        Self::new(linalg::from_real_diagonal(p))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.op.eigenvalues()
    }

    pub fn spectrum(&self) -> &Eigh {
        self.op.spectrum()
    }

    /// `Tr(rho A)`.
    pub fn expectation(&self, a: &HermitianOperator) -> f64 {
        linalg::trace_product(self.matrix(), a.matrix()).re
    }

    /// `rho ⊗ sigma`.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_trusted(linalg::kron(self.matrix(), other.matrix()))
    }

    /// `rho^{⊗ n}`.
    pub fn tensor_power(&self, n: usize) -> Result<DensityMatrix> {
        checked_power_dim(self.dim(), n)?;
        let mut acc = CMatrix::identity(1, 1);
        for _ in 0..n {
            acc = linalg::kron(&acc, self.matrix());
        }
        Ok(Self::from_trusted(acc))
    }

    /// `U rho U^dagger` for a unitary `U`.
    pub fn conjugate_by(&self, u: &CMatrix) -> DensityMatrix {
        Self::from_trusted(hermitian_part(&(u * self.matrix() * u.adjoint())))
    }

    /// Convex combination `(1 - t) self + t other`.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("mixing weight {t} outside [0,1]")));
        }
        Ok(Self::from_trusted(
            self.matrix() * linalg::real(1.0 - t) + other.matrix() * linalg::real(t),
        ))
    }
}

/// Ordered charges `[Q_0 = H, Q_1, ..., Q_c]` acting on one site.
#[derive(Debug, Clone)]
pub struct ChargeFamily {
    charges: Vec<HermitianOperator>,
    labels: Vec<String>,
}

/// Smallest Gram eigenvalue accepted for the traceless parts of a family.
pub const INDEPENDENCE_TOL: f64 = 1e-9;

impl ChargeFamily {
    /// Checks common dimension and linear independence of `{I, Q_0..Q_c}`.
    pub fn new(charges: Vec<HermitianOperator>, labels: Vec<String>) -> Result<Self> {
        let first = charges
            .first()
            .ok_or_else(|| Error::InvalidArgument("a charge family needs at least one charge".into()))?;
        let d = first.dim();
        for q in &charges {
            if q.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: q.dim(),
                });
            }
        }
        if labels.len() != charges.len() {
            return Err(Error::DimensionMismatch {
                expected: charges.len(),
                found: labels.len(),
            });
        }
        let traceless: Vec<CMatrix> = charges
            .iter()
            .map(|q| q.matrix() - linalg::identity(d) * linalg::real(q.trace() / d as f64))
            .collect();
        let k = traceless.len();
        let gram = nalgebra::DMatrix::<f64>::from_fn(k, k, |i, j| {
            linalg::trace_product(&traceless[i], &traceless[j]).re
        });
        let sigma_min = nalgebra::SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(sigma_min > INDEPENDENCE_TOL) {
            return Err(Error::DependentCharges { sigma_min });
        }
        Ok(Self { charges, labels })
    }

    /// Family with labels `Q0, Q1, ...`.
    pub fn unlabeled(charges: Vec<HermitianOperator>) -> Result<Self> {
        let labels = (0..charges.len()).map(|j| format!("Q{j}")).collect();
        Self::new(charges, labels)
    }

    pub fn site_dim(&self) -> usize {
        self.charges[0].dim()
    }

    /// Number of charges `c + 1`.
    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn charges(&self) -> &[HermitianOperator] {
        &self.charges
    }

    pub fn charge(&self, j: usize) -> &HermitianOperator {
        &self.charges[j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// True when every pair of charges commutes within `tol` (spectral norm).
    pub fn is_commuting(&self, tol: f64) -> bool {
        for i in 0..self.charges.len() {
            for j in (i + 1)..self.charges.len() {
                if !self.charges[i].commutes_with(&self.charges[j], tol) {
                    return false;
                }
            }
        }
        true
    }

    /// Family of total charges `sum_l I⊗..⊗Q_j⊗..⊗I` on `copies` sites.
    pub fn totals(&self, copies: usize) -> Result<ChargeFamily> {
        let charges = self
            .charges
            .iter()
            .map(|q| total_charge(q, copies))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            charges,
            labels: self.labels.iter().map(|l| format!("{l}_tot")).collect(),
        })
    }
}

/// Closed interval of eigenvalues `[center - half_width, center + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub center: f64,
    pub half_width: f64,
}

impl SpectralWindow {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width >= 0.0) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "window half-width must be non-negative, got {half_width}"
            )));
        }
        Ok(Self { center, half_width })
    }

    /// Membership with an absolute endpoint slack.
    pub fn contains(&self, x: f64, slack: f64) -> bool {
        (x - self.center).abs() <= self.half_width + slack
    }
}

/// `I^{⊗site} ⊗ Q ⊗ I^{⊗(copies-1-site)}`.
pub fn embed_site(q: &HermitianOperator, site: usize, copies: usize) -> Result<HermitianOperator> {
    if site >= copies {
        return Err(Error::IndexOutOfRange {
            index: site,
            len: copies,
        });
    }
    let d = q.dim();
    let dim = checked_power_dim(d, copies)?;
    let left = d.pow(site as u32);
    let right = d.pow((copies - 1 - site) as u32);
    let mut m = CMatrix::zeros(dim, dim);
    let qm = q.matrix();
    for a in 0..left {
        for i in 0..d {
            for j in 0..d {
                let z = qm[(i, j)];
                if z == ZERO {
                    continue;
                }
                let row0 = (a * d + i) * right;
                let col0 = (a * d + j) * right;
                for b in 0..right {
                    m[(row0 + b, col0 + b)] = z;
                }
            }
        }
    }
    Ok(HermitianOperator::from_hermitian(m))
}

/// `sum_l embed_site(Q, l, copies)`.
pub fn total_charge(q: &HermitianOperator, copies: usize) -> Result<HermitianOperator> {
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
    Ok(HermitianOperator::from_hermitian(acc.expect("copies >= 1")))
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Split every full index into (kept index, traced index).
fn split_indices(dims: &[usize], keep: &[usize]) -> Result<(Vec<usize>, Vec<usize>, usize, usize)> {
    for &k in keep {
        if k >= dims.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: dims.len(),
            });
        }
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let total: usize = dims.iter().product();
    let st = strides(dims);
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let kst = strides(&kept_dims);
    let tst = strides(&traced_dims);
    let mut kidx = vec![0; total];
    let mut tidx = vec![0; total];
    for i in 0..total {
        let mut ki = 0;
        let mut ti = 0;
        for (pos, &k) in kept.iter().enumerate() {
            ki += ((i / st[k]) % dims[k]) * kst[pos];
        }
        for (pos, &k) in traced.iter().enumerate() {
            ti += ((i / st[k]) % dims[k]) * tst[pos];
        }
        kidx[i] = ki;
        tidx[i] = ti;
    }
    Ok((kidx, tidx, kept_dims.iter().product(), traced_dims.iter().product()))
}

/// Reduced state on the subsystems `keep` of a state on `dims[0] ⊗ dims[1] ⊗ ...`.
pub fn partial_trace_subsystems(
    rho: &DensityMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: total,
            found: rho.dim(),
        });
    }
    let (kidx, tidx, kdim, tdim) = split_indices(dims, keep)?;
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); tdim];
    for i in 0..total {
        groups[tidx[i]].push(i);
    }
    let m = rho.matrix();
    let mut out = CMatrix::zeros(kdim, kdim);
    for g in &groups {
        for &j in g {
            for &i in g {
                out[(kidx[i], kidx[j])] += m[(i, j)];
            }
        }
    }
    Ok(DensityMatrix::from_trusted(hermitian_part(&out)))
}

/// Number of sites `n` with `site_dim^n == dim`.
pub fn copies_for(dim: usize, site_dim: usize) -> Result<usize> {
    if site_dim < 2 {
        return Err(Error::InvalidArgument("site dimension must be at least 2".into()));
    }
    let mut n = 0;
    let mut acc = 1usize;
    while acc < dim {
        acc = acc.saturating_mul(site_dim);
        n += 1;
    }
    if acc != dim {
        return Err(Error::DimensionMismatch {
            expected: acc,
            found: dim,
        });
    }
    Ok(n)
}

/// Single-site reduced state of a state on `site_dim^N`.
pub fn partial_trace(rho: &DensityMatrix, site_dim: usize, keep: usize) -> Result<DensityMatrix> {
    let n = copies_for(rho.dim(), site_dim)?;
    if keep >= n {
        return Err(Error::IndexOutOfRange { index: keep, len: n });
    }
    partial_trace_subsystems(rho, &vec![site_dim; n], &[keep])
}

/// Single-site reduced state of the pure state `psi` (assumed normalized).
pub fn reduced_state_of_vector(psi: &CVector, site_dim: usize, keep: usize) -> Result<DensityMatrix> {
    let n = copies_for(psi.len(), site_dim)?;
    if keep >= n {
        return Err(Error::IndexOutOfRange { index: keep, len: n });
    }
    let right = site_dim.pow((n - 1 - keep) as u32);
    let left = site_dim.pow(keep as u32);
    let mut out = CMatrix::zeros(site_dim, site_dim);
    for a in 0..left {
        for b in 0..right {
            for i in 0..site_dim {
                let xi = psi[(a * site_dim + i) * right + b];
                if xi == ZERO {
                    continue;
                }
                for j in 0..site_dim {
                    out[(i, j)] += xi * psi[(a * site_dim + j) * right + b].conj();
                }
            }
        }
    }
    Ok(DensityMatrix::from_trusted(hermitian_part(&out)))
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `S(rho) = -sum lambda log lambda`, eigenvalues clipped to `[0, 1]`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s: f64 = rho
        .eigenvalues()
        .iter()
        .map(|&l| -xlogx(l.clamp(0.0, 1.0)))
        .sum();
    s.max(0.0)
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Weight of `rho` on the eigenvectors of `gamma` with (numerically) zero
/// eigenvalue.
pub fn weight_outside_support(rho: &DensityMatrix, gamma: &DensityMatrix) -> f64 {
    let g = gamma.spectrum();
    let m = rho.matrix();
    let mut w = 0.0;
    for (k, &lam) in g.values.iter().enumerate() {
        if lam <= NULL_EIGENVALUE {
            let v = g.vectors.column(k);
            w += (v.adjoint() * m * v)[(0, 0)].re;
        }
    }
    w
}

/// `D(rho||gamma) = Tr rho log rho - Tr rho log gamma`; `+inf` when the
/// support of `rho` is not contained in that of `gamma`.
pub fn relative_entropy(rho: &DensityMatrix, gamma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), gamma.dim())?;
    if weight_outside_support(rho, gamma) > SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    let neg_entropy: f64 = rho
        .eigenvalues()
        .iter()
        .map(|&l| xlogx(l.clamp(0.0, 1.0)))
        .sum();
    let g = gamma.spectrum();
    let m = rho.matrix();
    let mut cross = 0.0;
    for (k, &lam) in g.values.iter().enumerate() {
        let v = g.vectors.column(k);
        let weight = (v.adjoint() * m * v)[(0, 0)].re;
        cross += weight * lam.max(LOG_FLOOR).ln();
    }
    Ok((neg_entropy - cross).max(0.0))
}

/// `||rho - sigma||_1`, in `[0, 2]`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let diff = rho.matrix() - sigma.matrix();
    let e = eigh(&diff);
    Ok(e.values.iter().map(|x| x.abs()).sum())
}

/// `f(H)` evaluated in the eigenbasis of `H`.
pub fn apply_spectral_function(h: &HermitianOperator, f: impl Fn(f64) -> f64) -> HermitianOperator {
    let m = h.spectrum().map(f);
    HermitianOperator::from_hermitian(hermitian_part(&m))
}

/// Matrix logarithm of a positive operator with eigenvalues floored at
/// [`LOG_FLOOR`].
pub fn log_operator(h: &HermitianOperator) -> HermitianOperator {
    apply_spectral_function(h, |x| x.max(LOG_FLOOR).ln())
}

/// Piecewise-linear ramp: 1 on `[-inner, inner]`, 0 outside
/// `[-outer, outer]`, linear in between.
pub fn ramp(x: f64, inner: f64, outer: f64) -> f64 {
    let ax = x.abs();
    if ax <= inner {
        1.0
    } else if ax >= outer {
        0.0
    } else {
        (outer - ax) / (outer - inner)
    }
}

/// `U h U^dagger` as a Hermitian operator.
pub fn conjugate_operator(h: &HermitianOperator, u: &CMatrix) -> HermitianOperator {
    HermitianOperator::from_hermitian(hermitian_part(&(u * h.matrix() * u.adjoint())))
}
