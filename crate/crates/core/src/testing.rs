//! Shared fixtures for unit tests.

use crate::linalg::{c, from_real_diagonal, CMatrix};
use crate::qops::{ChargeFamily, HermitianOperator};

pub fn jx() -> HermitianOperator {
    HermitianOperator::new(CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
    ))
    .unwrap()
}

pub fn jy() -> HermitianOperator {
    HermitianOperator::new(CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)],
    ))
    .unwrap()
}

pub fn jz() -> HermitianOperator {
    HermitianOperator::from_hermitian(from_real_diagonal(&[0.5, -0.5]))
}

/// `{J_x, J_y, J_z}` on one qubit.
pub fn spin_family() -> ChargeFamily {
    ChargeFamily::new(vec![jx(), jy(), jz()], vec!["Jx".into(), "Jy".into(), "Jz".into()]).unwrap()
}
