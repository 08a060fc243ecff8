//! Dense complex linear algebra helpers shared by every module.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Default cap on the dimension of any operator built by the library.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Environment variable that overrides [`DEFAULT_DIM_CAP`].
pub const DIM_CAP_ENV: &str = "NATSLAB_DIM_CAP";

/// Dimension cap in force: `NATSLAB_DIM_CAP` when set to a positive integer,
/// otherwise [`DEFAULT_DIM_CAP`].
pub fn dim_cap() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(DEFAULT_DIM_CAP)
}

/// `d^n`, failing with `DimensionOverflow` above the active cap.
pub fn checked_power_dim(d: usize, n: usize) -> Result<usize> {
    let cap = dim_cap();
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = match dim.checked_mul(d) {
            Some(v) if v <= cap => v,
            _ => {
                return Err(Error::DimensionOverflow {
                    dim: d.saturating_pow(n as u32),
                    cap,
                })
            }
        };
    }
    Ok(dim)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn from_real_diagonal(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| real(v)),
    ))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest absolute entry of `m - m^dagger`.
pub fn anti_hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * real(0.5)
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != ZERO {
                return false;
            }
        }
    }
    true
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm (largest singular value) of an arbitrary square matrix.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if is_diagonal(m) {
        return m.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    m.clone().singular_values().max()
}

/// Spectral norm of a matrix known to be Hermitian.
pub fn op_norm_hermitian(m: &CMatrix) -> f64 {
    let e = eigh(m);
    e.values
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Ascending spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl Eigh {
    /// Rebuild `V diag(f(values)) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let fk = f(self.values[k]);
            scaled.column_mut(k).scale_mut(fk);
        }
        &scaled * self.vectors.adjoint()
    }

    /// Rebuild `V diag(g(values)) V^dagger` for a complex-valued `g`.
    pub fn map_complex(&self, g: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let gk = g(self.values[k]);
            for i in 0..n {
                scaled[(i, k)] *= gk;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

const PHASE_TOL: f64 = 1e-12;

fn leading_index(v: &[Complex64]) -> usize {
    v.iter()
        .position(|z| z.norm() > PHASE_TOL)
        .unwrap_or(v.len())
}

/// Make the first non-negligible component real and positive.
fn fix_phase(col: &mut [Complex64]) {
    if let Some(z) = col.iter().find(|z| z.norm() > PHASE_TOL).copied() {
        let phase = z.conj() / z.norm();
        for x in col.iter_mut() {
            *x *= phase;
        }
    }
}

fn lexicographic(a: &[Complex64], b: &[Complex64]) -> Ordering {
    leading_index(a).cmp(&leading_index(b)).then_with(|| {
        for (x, y) in a.iter().zip(b) {
            let o = x
                .re
                .total_cmp(&y.re)
                .reverse()
                .then_with(|| x.im.total_cmp(&y.im).reverse());
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    })
}

/// Hermitian eigendecomposition with ascending eigenvalues, phase-fixed
/// eigenvectors and a deterministic order among exactly tied eigenvalues.
///
/// Diagonal inputs skip the iterative solver; the eigenvectors are then the
/// standard basis vectors.
pub fn eigh(m: &CMatrix) -> Eigh {
    let n = m.nrows();
    let (values, vectors) = if is_diagonal(m) {
        let vals: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
        (vals, identity(n))
    } else {
        let se = SymmetricEigen::new(hermitian_part(m));
        (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
    };

    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|k| vectors.column(k).iter().copied().collect())
        .collect();
    for col in cols.iter_mut() {
        fix_phase(col);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .total_cmp(&values[b])
            .then_with(|| lexicographic(&cols[a], &cols[b]))
    });

    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let mut sorted_vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vectors[(i, dst)] = cols[src][i];
        }
    }
    Eigh {
        values: sorted_values,
        vectors: sorted_vectors,
    }
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    if is_diagonal(m) {
        return m
            .diagonal()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
    }
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    -max_eigenvalue(&(-m))
}

/// `exp(i g)` for Hermitian `g`.
pub fn exp_i_hermitian(g: &CMatrix) -> CMatrix {
    eigh(g).map_complex(|x| Complex64::new(0.0, x).exp())
}

/// `max |U^dagger U - I|` measured in spectral norm.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    op_norm(&(u.adjoint() * u - identity(n)))
}

/// Orthonormal basis (as columns) of the range of a Hermitian projector.
pub fn projector_range(p: &CMatrix) -> CMatrix {
    let e = eigh(p);
    let keep: Vec<usize> = (0..e.values.len()).filter(|&k| e.values[k] > 0.5).collect();
    let mut basis = CMatrix::zeros(p.nrows(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &e.vectors.column(src));
    }
    basis
}

/// Stable Cholesky solve of `(a + tau I) x = b` for a real symmetric positive
/// semidefinite `a`; grows `tau` until the factorization succeeds.
pub fn damped_solve(a: &DMatrix<f64>, b: &DVector<f64>, tau0: f64) -> Option<DVector<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut tau = tau0 * scale;
    for _ in 0..40 {
        let damped = a + DMatrix::<f64>::identity(n, n) * tau;
        if let Some(ch) = damped.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        tau = if tau == 0.0 { 1e-14 * scale } else { tau * 10.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMatrix::from_fn(n, n, |_, _| c(next(), next()));
        hermitian_part(&m)
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        for seed in 0..5 {
            let h = random_hermitian(7, seed);
            let e = eigh(&h);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let back = e.map(|x| x);
            assert!(frobenius_norm(&(back - &h)) < 1e-10);
            let gram = e.vectors.adjoint() * &e.vectors;
            assert!(frobenius_norm(&(gram - identity(7))) < 1e-10);
        }
    }

    #[test]
    fn eigh_is_phase_fixed_and_deterministic() {
        let h = random_hermitian(5, 11);
        let a = eigh(&h);
        let b = eigh(&h.clone());
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
        for k in 0..5 {
            let col: Vec<_> = a.vectors.column(k).iter().copied().collect();
            let lead = col.iter().find(|z| z.norm() > PHASE_TOL).unwrap();
            assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
        }
    }

    #[test]
    fn diagonal_ties_keep_index_order() {
        let d = from_real_diagonal(&[1.0, 0.0, 1.0, 0.0]);
        let e = eigh(&d);
        assert_eq!(e.values, vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(e.vectors[(1, 0)], ONE);
        assert_eq!(e.vectors[(3, 1)], ONE);
        assert_eq!(e.vectors[(0, 2)], ONE);
        assert_eq!(e.vectors[(2, 3)], ONE);
    }

    #[test]
    fn op_norm_matches_hermitian_route() {
        let h = random_hermitian(6, 3);
        assert!((op_norm(&h) - op_norm_hermitian(&h)).abs() < 1e-12);
    }

    #[test]
    fn power_dim_respects_cap() {
        assert_eq!(checked_power_dim(2, 12).unwrap(), 4096);
        assert!(matches!(
            checked_power_dim(2, 13),
            Err(Error::DimensionOverflow { .. })
        ));
    }
}
