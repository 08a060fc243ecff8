//! Non-Abelian thermal states, approximate microcanonical subspaces and
//! the resource theory of noncommuting charges, at desk scale.
//!
//! The modules build on each other bottom-up:
//!
//! - [`qops`]: Hermitian operators, density matrices, partial traces,
//!   entropies and distances.
//! - [`nats`]: the generalized Gibbs state `exp(-sum_j mu_j Q_j)/Z` and the
//!   maximum-entropy fit of its potentials.
//! - [`microcanonical`]: averaged charges on `N` copies, window projectors,
//!   commuting approximants, subspace certification and the relative-entropy
//!   report.
//! - [`typicality`]: Haar sampling inside a subspace.
//! - [`resource`]: payoff operator, free unitaries, passivity, Rényi free
//!   energies and second-law checks.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod linalg;
pub mod microcanonical;
pub mod nats;
pub mod qops;
pub mod random;
pub mod resource;
pub mod typicality;

#[cfg(test)]
pub(crate) mod testing;

pub use error::{Error, Result};
pub use nats::{build_nats, expectations, fit_potentials, log_partition, FitOptions, NatsParams, TargetValues};
pub use qops::{ChargeFamily, DensityMatrix, HermitianOperator, SpectralWindow};
