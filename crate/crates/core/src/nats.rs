//! The generalized Gibbs state `gamma = exp(-sum_j mu_j Q_j) / Z` and the
//! maximum-entropy fit of its potentials to prescribed charge values.
//!
//! Index 0 of `mu` pairs with the Hamiltonian, so the inverse temperature is
//! `mu[0]` and the chemical potential of charge `j` is `mu[j] / mu[0]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, damped_solve, CMatrix, Eigh};
use crate::qops::{ChargeFamily, DensityMatrix, HermitianOperator};

/// Fitted potentials with the log-partition value and moment residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NatsParams {
    pub mu: Vec<f64>,
    pub log_partition: f64,
    /// Fitted expectation minus target, per charge.
    pub residuals: Vec<f64>,
    #[serde(default)]
    pub iterations: usize,
}

impl NatsParams {
    pub fn beta(&self) -> f64 {
        self.mu[0]
    }

    /// `mu_j / mu_0`, or `None` when `mu_0 == 0`.
    pub fn chemical_potentials(&self) -> Option<Vec<f64>> {
        let beta = self.beta();
        if beta == 0.0 {
            return None;
        }
        Some(self.mu[1..].iter().map(|m| m / beta).collect())
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// Target expectation values `v_j`, one per charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetValues {
    pub v: Vec<f64>,
}

impl TargetValues {
    pub fn new(v: Vec<f64>) -> Self {
        Self { v }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Checks the length and that each `v_j` lies in the spectrum hull of `Q_j`.
    pub fn validate(&self, family: &ChargeFamily) -> Result<()> {
        check_len(family, self.v.len())?;
        for (q, &v) in family.charges().iter().zip(&self.v) {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("target value {v} is not finite")));
            }
            if v < q.min_eigenvalue() || v > q.max_eigenvalue() {
                return Err(Error::InfeasibleTarget {
                    mu_norm: f64::INFINITY,
                    residual: (v - v.clamp(q.min_eigenvalue(), q.max_eigenvalue())).abs(),
                });
            }
        }
        Ok(())
    }
}

fn check_len(family: &ChargeFamily, found: usize) -> Result<()> {
    if found != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            found,
        });
    }
    Ok(())
}

/// `sum_j mu_j Q_j`.
pub fn generator(family: &ChargeFamily, mu: &[f64]) -> Result<HermitianOperator> {
    check_len(family, mu.len())?;
    HermitianOperator::linear_combination(mu, family.charges())
}

/// Spectral data of `gamma_mu`: eigenbasis of the generator, Boltzmann
/// weights and `log Z`.
struct Thermal {
    spectrum: Eigh,
    weights: Vec<f64>,
    log_z: f64,
}

fn thermal(family: &ChargeFamily, mu: &[f64]) -> Result<Thermal> {
    let k = generator(family, mu)?;
    let spectrum = linalg::eigh(k.matrix());
    let kmin = spectrum.values[0];
    let raw: Vec<f64> = spectrum.values.iter().map(|&x| (-(x - kmin)).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    Ok(Thermal {
        spectrum,
        weights,
        log_z: -kmin + total.ln(),
    })
}

impl Thermal {
    fn state(&self) -> DensityMatrix {
        let mut scaled = self.spectrum.vectors.clone();
        for (k, &w) in self.weights.iter().enumerate() {
            scaled.column_mut(k).scale_mut(w);
        }
        let m = &scaled * self.spectrum.vectors.adjoint();
        let spectrum = Eigh {
            values: self.weights.clone(),
            vectors: self.spectrum.vectors.clone(),
        };
        DensityMatrix::from_trusted_parts(linalg::hermitian_part(&m), sorted(spectrum))
    }

    /// Charges rotated into the generator eigenbasis.
    fn rotated(&self, family: &ChargeFamily) -> Vec<CMatrix> {
        let v = &self.spectrum.vectors;
        family
            .charges()
            .iter()
            .map(|q| v.adjoint() * q.matrix() * v)
            .collect()
    }

    fn expectations(&self, rotated: &[CMatrix]) -> Vec<f64> {
        rotated
            .iter()
            .map(|q| {
                q.diagonal()
                    .iter()
                    .zip(&self.weights)
                    .map(|(z, p)| z.re * p)
                    .sum()
            })
            .collect()
    }
}

/// Re-sort an eigen-decomposition by ascending value.
fn sorted(e: Eigh) -> Eigh {
    let n = e.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.values[a].total_cmp(&e.values[b]).then(a.cmp(&b)));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &e.vectors.column(src));
    }
    Eigh {
        values: order.iter().map(|&k| e.values[k]).collect(),
        vectors,
    }
}

/// `exp(-sum_j mu_j Q_j) / Z`.
pub fn build_nats(family: &ChargeFamily, mu: &[f64]) -> Result<DensityMatrix> {
    Ok(thermal(family, mu)?.state())
}

/// `log Tr exp(-sum_j mu_j Q_j)`, shifted by the smallest generator
/// eigenvalue to avoid overflow.
pub fn log_partition(family: &ChargeFamily, mu: &[f64]) -> Result<f64> {
    Ok(thermal(family, mu)?.log_z)
}

/// `[Tr(rho Q_0), ..., Tr(rho Q_c)]`.
pub fn expectations(rho: &DensityMatrix, family: &ChargeFamily) -> Result<Vec<f64>> {
    if rho.dim() != family.site_dim() {
        return Err(Error::DimensionMismatch {
            expected: family.site_dim(),
            found: rho.dim(),
        });
    }
    Ok(family.charges().iter().map(|q| rho.expectation(q)).collect())
}

/// Dual objective `log Z(mu) + mu . v`.
pub fn dual_value(family: &ChargeFamily, targets: &TargetValues, mu: &[f64]) -> Result<f64> {
    check_len(family, targets.len())?;
    let lz = log_partition(family, mu)?;
    Ok(lz + mu.iter().zip(&targets.v).map(|(m, v)| m * v).sum::<f64>())
}

/// Dual gradient `v_j - Tr(gamma_mu Q_j)`.
pub fn dual_gradient(family: &ChargeFamily, targets: &TargetValues, mu: &[f64]) -> Result<Vec<f64>> {
    check_len(family, targets.len())?;
    let th = thermal(family, mu)?;
    let e = th.expectations(&th.rotated(family));
    Ok(targets.v.iter().zip(&e).map(|(v, x)| v - x).collect())
}

/// Divided difference of the Boltzmann weights, symmetric in its arguments:
/// `(p_a - p_b) / (k_b - k_a)`, or `p_a` on the diagonal.
fn kubo_mori_weight(pa: f64, pb: f64, ka: f64, kb: f64) -> f64 {
    let delta = (kb - ka).abs();
    let p = pa.max(pb);
    if delta < 1e-12 {
        p
    } else {
        p * (-(-delta).exp_m1()) / delta
    }
}

fn hessian_from(th: &Thermal, rotated: &[CMatrix], expect: &[f64]) -> DMatrix<f64> {
    let n = th.weights.len();
    let c = rotated.len();
    let mut phi = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            phi[(a, b)] = kubo_mori_weight(
                th.weights[a],
                th.weights[b],
                th.spectrum.values[a],
                th.spectrum.values[b],
            );
        }
    }
    let mut h = DMatrix::<f64>::zeros(c, c);
    for i in 0..c {
        for j in i..c {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += (rotated[i][(a, b)] * rotated[j][(b, a)]).re * phi[(a, b)];
                }
            }
            let v = acc - expect[i] * expect[j];
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Exact dual Hessian: the Kubo–Mori covariance of the charges under
/// `gamma_mu` (positive semidefinite).
pub fn dual_hessian(family: &ChargeFamily, mu: &[f64]) -> Result<DMatrix<f64>> {
    let th = thermal(family, mu)?;
    let rotated = th.rotated(family);
    let e = th.expectations(&rotated);
    Ok(hessian_from(&th, &rotated, &e))
}

/// Controls for [`fit_potentials_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Maximum moment residual accepted.
    pub tol: f64,
    pub max_iterations: usize,
    /// Potentials with Euclidean norm above this signal an unreachable target.
    pub mu_cap: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 500,
            mu_cap: 1e3,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Fits `mu` so that `Tr(gamma_mu Q_j) = v_j` within `tol`.
pub fn fit_potentials(family: &ChargeFamily, targets: &TargetValues, tol: f64) -> Result<NatsParams> {
    fit_potentials_with(
        family,
        targets,
        &FitOptions {
            tol,
            ..FitOptions::default()
        },
    )
}

/// Damped Newton on the convex dual `log Z(mu) + mu . v`, starting at
/// `mu = 0`, with backtracking and a gradient-descent fallback.
pub fn fit_potentials_with(
    family: &ChargeFamily,
    targets: &TargetValues,
    opts: &FitOptions,
) -> Result<NatsParams> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    targets.validate(family)?;
    let c = family.len();
    let v = &targets.v;
    let mut mu = vec![0.0; c];
    let dual = |th: &Thermal, mu: &[f64]| th.log_z + mu.iter().zip(v).map(|(m, x)| m * x).sum::<f64>();

    let mut th = thermal(family, &mu)?;
    for iter in 0..=opts.max_iterations {
        let rotated = th.rotated(family);
        let e = th.expectations(&rotated);
        let residuals: Vec<f64> = e.iter().zip(v).map(|(x, t)| x - t).collect();
        let residual = residuals.iter().fold(0.0, |a: f64, r| a.max(r.abs()));
        if residual <= opts.tol {
            return Ok(NatsParams {
                mu,
                log_partition: th.log_z,
                residuals,
                iterations: iter,
            });
        }
        let mu_norm = norm(&mu);
        if mu_norm > opts.mu_cap {
            return Err(Error::InfeasibleTarget { mu_norm, residual });
        }
        if iter == opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual,
            });
        }

        let grad: Vec<f64> = residuals.iter().map(|r| -r).collect();
        let g0 = dual(&th, &mu);
        let h = hessian_from(&th, &rotated, &e);
        let newton = damped_solve(&h, &DVector::from_iterator(c, grad.iter().map(|g| -g)), 1e-12)
            .map(|d| d.iter().copied().collect::<Vec<f64>>());

        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if let Some(d) = newton {
            candidates.push(d);
        }
        candidates.push(grad.iter().map(|g| -g).collect());

        let mut stepped = false;
        for d in candidates {
            let slope: f64 = grad.iter().zip(&d).map(|(g, x)| g * x).sum();
            if !(slope < 0.0) {
                continue;
            }
            let mut t = 1.0;
            while t > 1e-14 {
                let trial: Vec<f64> = mu.iter().zip(&d).map(|(m, x)| m + t * x).collect();
                let th_trial = thermal(family, &trial)?;
                let g1 = dual(&th_trial, &trial);
                // Near the optimum the dual is flat to rounding, so a step
                // that shrinks the residual is accepted on that basis.
                let flat = (g1 - g0).abs() <= 1e-13 * g0.abs().max(1.0);
                let improves = flat && {
                    let e1 = th_trial.expectations(&th_trial.rotated(family));
                    let r1 = e1.iter().zip(v).fold(0.0, |a: f64, (x, t)| a.max((x - t).abs()));
                    r1 < residual
                };
                if g1 <= g0 + 1e-4 * t * slope || improves {
                    mu = trial;
                    th = th_trial;
                    stepped = true;
                    break;
                }
                t *= 0.5;
            }
            if stepped {
                break;
            }
        }
        if !stepped {
            let mu_norm = norm(&mu);
            if mu_norm > opts.mu_cap {
                return Err(Error::InfeasibleTarget { mu_norm, residual });
            }
            return Err(Error::NoConvergence {
                iterations: iter,
                residual,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}
