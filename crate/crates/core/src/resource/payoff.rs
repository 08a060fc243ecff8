//! The payoff operator `W = sum_j mu_j Q_j`, work accounting and passivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qops::{ChargeFamily, DensityMatrix, HermitianOperator};

/// Eigenvalues of `W` closer than this fraction of its spectral diameter to
/// the first eigenvalue of a group belong to that group.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Commutator norm below which a state counts as diagonal in the payoff basis.
pub const PASSIVITY_TOL: f64 = 1e-9;

/// One eigenspace of the payoff operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    /// First (smallest) eigenvalue in the group.
    pub value: f64,
    /// Orthonormal columns spanning the eigenspace.
    pub basis: CMatrix,
}

impl EigenGroup {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Payoff operator with its degeneracy-aware eigenspace partition.
#[derive(Debug, Clone)]
pub struct PayoffFunction {
    operator: HermitianOperator,
    mu: Vec<f64>,
    groups: Vec<EigenGroup>,
}

impl PayoffFunction {
    /// Partitions the spectrum of an arbitrary Hermitian payoff.
    pub fn from_operator(operator: HermitianOperator, mu: Vec<f64>) -> Self {
        let spec = operator.spectrum();
        let scale = operator.spectral_diameter();
        let mut cuts = vec![0];
        let mut start = spec.values[0];
        for (k, &v) in spec.values.iter().enumerate().skip(1) {
            if v - start > DEGENERACY_TOL * scale {
                cuts.push(k);
                start = v;
            }
        }
        cuts.push(spec.values.len());
        let groups = cuts
            .windows(2)
            .map(|w| EigenGroup {
                value: spec.values[w[0]],
                basis: spec.vectors.columns(w[0], w[1] - w[0]).into_owned(),
            })
            .collect();
        Self { operator, mu, groups }
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Eigenspaces in ascending payoff order.
    pub fn groups(&self) -> &[EigenGroup] {
        &self.groups
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Block-diagonal part of `rho` with respect to the eigenspaces.
    pub fn pinch(&self, rho: &CMatrix) -> CMatrix {
        let n = rho.nrows();
        let mut out = CMatrix::zeros(n, n);
        for g in &self.groups {
            let b = &g.basis;
            out += b * (b.adjoint() * rho * b) * b.adjoint();
        }
        linalg::hermitian_part(&out)
    }

    /// Compressions `B_k^dagger rho B_k`, one per eigenspace.
    pub fn blocks(&self, rho: &CMatrix) -> Vec<CMatrix> {
        self.groups
            .iter()
            .map(|g| linalg::hermitian_part(&(g.basis.adjoint() * rho * &g.basis)))
            .collect()
    }
}

/// `W = sum_j mu_j Q_j` on the space of `family`.
pub fn payoff_operator(family: &ChargeFamily, mu: &[f64]) -> Result<PayoffFunction> {
    if mu.len() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            found: mu.len(),
        });
    }
    let op = HermitianOperator::linear_combination(mu, family.charges())?;
    Ok(PayoffFunction::from_operator(op, mu.to_vec()))
}

fn check_dim(w: &PayoffFunction, d: usize) -> Result<()> {
    if w.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: d,
        });
    }
    Ok(())
}

/// `Tr(rho_after W) - Tr(rho_before W)`: payoff gained by the register
/// holding the state.
pub fn average_work(rho_before: &DensityMatrix, rho_after: &DensityMatrix, w: &PayoffFunction) -> Result<f64> {
    check_dim(w, rho_before.dim())?;
    check_dim(w, rho_after.dim())?;
    Ok(rho_after.expectation(w.operator()) - rho_before.expectation(w.operator()))
}

/// A payoff level of the passivity witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub payoff: f64,
    pub population: f64,
    /// Computational-basis index carrying most of the level's eigenvector.
    pub index: usize,
}

/// Why a state fails to be passive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PassivityWitness {
    /// The state has coherence between payoff eigenspaces.
    Coherence { commutator_norm: f64 },
    /// A higher payoff level is more populated than a lower one.
    Ordering { higher: Level, lower: Level },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityResult {
    pub passive: bool,
    pub commutator_norm: f64,
    pub witness: Option<PassivityWitness>,
}

fn dominant_index(v: &CMatrix, col: usize) -> usize {
    let mut best = 0;
    let mut weight = -1.0;
    for i in 0..v.nrows() {
        let w = v[(i, col)].norm_sqr();
        if w > weight + 1e-12 {
            weight = w;
            best = i;
        }
    }
    best
}

/// Passive iff `rho` commutes with `W` and populations do not increase with
/// the payoff across distinct eigenvalues.
pub fn passivity_check(rho: &DensityMatrix, w: &PayoffFunction) -> Result<PassivityResult> {
    check_dim(w, rho.dim())?;
    let commutator_norm = linalg::op_norm(&linalg::commutator(rho.matrix(), w.operator().matrix()));
    if commutator_norm > PASSIVITY_TOL {
        return Ok(PassivityResult {
            passive: false,
            commutator_norm,
            witness: Some(PassivityWitness::Coherence { commutator_norm }),
        });
    }
    // Each group: its populations in the eigenbasis of the compressed state.
    let mut levels: Vec<(usize, Vec<Level>)> = Vec::new();
    for (k, g) in w.groups().iter().enumerate() {
        let block = linalg::hermitian_part(&(g.basis.adjoint() * rho.matrix() * &g.basis));
        let e = linalg::eigh(&block);
        let vecs = &g.basis * &e.vectors;
        let lv = e
            .values
            .iter()
            .enumerate()
            .map(|(i, &p)| Level {
                payoff: g.value,
                population: p,
                index: dominant_index(&vecs, i),
            })
            .collect();
        levels.push((k, lv));
    }
    // Smallest population at each payoff versus largest at every higher payoff.
    for (a, (_, group)) in levels.iter().enumerate() {
        let lower = group
            .iter()
            .min_by(|x, y| x.population.total_cmp(&y.population))
            .copied()
            .expect("non-empty group");
        for (_, above) in &levels[a + 1..] {
            let higher = above
                .iter()
                .max_by(|x, y| x.population.total_cmp(&y.population))
                .copied()
                .expect("non-empty group");
            if higher.population > lower.population + PASSIVITY_TOL {
                return Ok(PassivityResult {
                    passive: false,
                    commutator_norm,
                    witness: Some(PassivityWitness::Ordering { higher, lower }),
                });
            }
        }
    }
    Ok(PassivityResult {
        passive: true,
        commutator_norm,
        witness: None,
    })
}
