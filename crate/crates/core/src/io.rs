//! JSON formats for operators, states and subspaces, and serde adapters that
//! write non-finite floats as `"inf"`, `"-inf"` and `"nan"`.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::microcanonical::{Provenance, Subspace, SubspaceParams};
use crate::nats::TargetValues;
use crate::qops::{ChargeFamily, DensityMatrix, HermitianOperator, HERMITICITY_REJECT};

/// Entries with modulus at or below this are omitted when writing.
const WRITE_ZERO: f64 = 0.0;

fn encode(x: f64) -> FloatRepr {
    if x.is_finite() {
        FloatRepr::Num(x)
    } else if x.is_nan() {
        FloatRepr::Str("nan".into())
    } else if x > 0.0 {
        FloatRepr::Str("inf".into())
    } else {
        FloatRepr::Str("-inf".into())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FloatRepr {
    Num(f64),
    Str(String),
}

impl FloatRepr {
    fn decode(self) -> std::result::Result<f64, String> {
        match self {
            FloatRepr::Num(x) => Ok(x),
            FloatRepr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                "nan" | "NaN" => Ok(f64::NAN),
                other => Err(format!("not a number: {other:?}")),
            },
        }
    }
}

/// `#[serde(with)]` adapter for one `f64`.
pub mod float {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        encode(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        FloatRepr::deserialize(d)?.decode().map_err(D::Error::custom)
    }
}

/// `#[serde(with)]` adapter for `Vec<f64>`.
pub mod float_vec {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|&x| encode(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        Vec::<FloatRepr>::deserialize(d)?
            .into_iter()
            .map(|r| r.decode().map_err(D::Error::custom))
            .collect()
    }
}

/// `#[serde(with)]` adapter for `Vec<Option<f64>>`; `None` is `null`.
pub mod float_opt_vec {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Option<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|x| x.map(encode)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Option<f64>>, D::Error> {
        Vec::<Option<FloatRepr>>::deserialize(d)?
            .into_iter()
            .map(|r| r.map(|v| v.decode()).transpose().map_err(D::Error::custom))
            .collect()
    }
}

/// Sparse Hermitian matrix: `entries` are `[row, col, re, im]` on and above
/// the diagonal. Entries below the diagonal are accepted and mirrored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl OperatorFile {
    pub fn from_operator(h: &HermitianOperator) -> Self {
        let m = h.matrix();
        let mut entries = Vec::new();
        for r in 0..h.dim() {
            for col in r..h.dim() {
                let z = m[(r, col)];
                if z.norm() > WRITE_ZERO {
                    entries.push((r, col, z.re, if r == col { 0.0 } else { z.im }));
                }
            }
        }
        Self { dim: h.dim(), entries }
    }

    /// Mirrors the entries into a full matrix, rejecting out-of-range or
    /// repeated positions and non-real diagonals.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.dim == 0 {
            return Err(Error::Format("operator dimension must be positive".into()));
        }
        crate::linalg::checked_power_dim(self.dim, 1)?;
        let mut m = CMatrix::zeros(self.dim, self.dim);
        let mut seen = HashSet::new();
        for &(r, col, re, im) in &self.entries {
            if r >= self.dim || col >= self.dim {
                return Err(Error::Format(format!(
                    "entry ({r}, {col}) outside a {0}x{0} operator",
                    self.dim
                )));
            }
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Format(format!("entry ({r}, {col}) is not finite")));
            }
            let (a, b, z) = if r <= col { (r, col, c(re, im)) } else { (col, r, c(re, -im)) };
            if !seen.insert((a, b)) {
                return Err(Error::Format(format!("duplicate entry for position ({a}, {b})")));
            }
            if a == b {
                if im.abs() > HERMITICITY_REJECT {
                    return Err(Error::NotHermitian { defect: im.abs() });
                }
                m[(a, a)] = c(re, 0.0);
            } else {
                m[(a, b)] = z;
                m[(b, a)] = z.conj();
            }
        }
        Ok(m)
    }

    pub fn to_operator(&self) -> Result<HermitianOperator> {
        HermitianOperator::new(self.to_matrix()?)
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.to_matrix()?)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut s = String::new();
    std::fs::File::open(path)?.read_to_string(&mut s)?;
    serde_json::from_str(&s).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_operator(path: &Path) -> Result<HermitianOperator> {
    read_json::<OperatorFile>(path)?.to_operator()
}

pub fn read_density(path: &Path) -> Result<DensityMatrix> {
    read_json::<OperatorFile>(path)?.to_density()
}

/// Sparse rectangular complex matrix, `[row, col, re, im]` per nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl SparseMatrix {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for col in 0..m.ncols() {
                let z = m[(r, col)];
                if z.norm() > WRITE_ZERO {
                    entries.push((r, col, z.re, z.im));
                }
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        let mut seen = HashSet::new();
        for &(r, col, re, im) in &self.entries {
            if r >= self.rows || col >= self.cols {
                return Err(Error::Format(format!("entry ({r}, {col}) outside {}x{}", self.rows, self.cols)));
            }
            if !seen.insert((r, col)) {
                return Err(Error::Format(format!("duplicate entry for position ({r}, {col})")));
            }
            m[(r, col)] = c(re, im);
        }
        Ok(m)
    }
}

/// A subspace together with the family and targets it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFile {
    pub copies: usize,
    pub site_dim: usize,
    pub provenance: Provenance,
    pub params: SubspaceParams,
    pub approximant_error: Option<f64>,
    pub targets: Vec<f64>,
    pub labels: Vec<String>,
    pub charges: Vec<OperatorFile>,
    pub basis: SparseMatrix,
}

impl SubspaceFile {
    pub fn new(m: &Subspace, family: &ChargeFamily, targets: &TargetValues) -> Self {
        Self {
            copies: m.copies,
            site_dim: m.site_dim,
            provenance: m.provenance,
            params: m.params,
            approximant_error: m.approximant_error,
            targets: targets.v.clone(),
            labels: family.labels().to_vec(),
            charges: family.charges().iter().map(OperatorFile::from_operator).collect(),
            basis: SparseMatrix::from_matrix(&m.basis),
        }
    }

    /// Rebuilds and revalidates the subspace, family and targets.
    pub fn load(&self) -> Result<(Subspace, ChargeFamily, TargetValues)> {
        let charges = self
            .charges
            .iter()
            .map(OperatorFile::to_operator)
            .collect::<Result<Vec<_>>>()?;
        let family = ChargeFamily::new(charges, self.labels.clone())?;
        if family.site_dim() != self.site_dim {
            return Err(Error::DimensionMismatch {
                expected: self.site_dim,
                found: family.site_dim(),
            });
        }
        let targets = TargetValues::new(self.targets.clone());
        targets.validate(&family)?;
        let mut m = Subspace::new(
            self.copies,
            self.site_dim,
            self.basis.to_matrix()?,
            self.provenance,
            self.params,
        )?;
        m.approximant_error = self.approximant_error;
        Ok((m, family, targets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcanonical::build_amc;
    use crate::testing::spin_family;

    #[test]
    fn operator_round_trip() {
        for q in spin_family().charges() {
            let f = OperatorFile::from_operator(q);
            let text = serde_json::to_string(&f).unwrap();
            let back: OperatorFile = serde_json::from_str(&text).unwrap();
            let h = back.to_operator().unwrap();
            assert_eq!(h.matrix(), q.matrix());
        }
    }

    #[test]
    fn lower_entries_are_mirrored() {
        let f = OperatorFile {
            dim: 2,
            entries: vec![(1, 0, 0.0, 0.5)],
        };
        let m = f.to_matrix().unwrap();
        assert_eq!(m[(0, 1)], c(0.0, -0.5));
        assert_eq!(m[(1, 0)], c(0.0, 0.5));
    }

    #[test]
    fn malformed_operators_rejected() {
        let dup = OperatorFile {
            dim: 2,
            entries: vec![(0, 1, 1.0, 0.0), (1, 0, 1.0, 0.0)],
        };
        assert!(matches!(dup.to_matrix(), Err(Error::Format(_))));
        let out = OperatorFile {
            dim: 2,
            entries: vec![(2, 0, 1.0, 0.0)],
        };
        assert!(matches!(out.to_matrix(), Err(Error::Format(_))));
        let diag = OperatorFile {
            dim: 2,
            entries: vec![(0, 0, 1.0, 0.1)],
        };
        assert!(matches!(diag.to_matrix(), Err(Error::NotHermitian { .. })));
        let bad: std::result::Result<OperatorFile, _> = serde_json::from_str(r#"{"dim": 2}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn density_validation_applies() {
        let f = OperatorFile {
            dim: 2,
            entries: vec![(0, 0, 0.7, 0.0)],
        };
        assert!(matches!(f.to_density(), Err(Error::InvalidState(_))));
    }

    #[test]
    fn non_finite_floats_use_strings() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct T {
            #[serde(with = "float_vec")]
            xs: Vec<f64>,
            #[serde(with = "float_opt_vec")]
            ys: Vec<Option<f64>>,
        }
        let t = T {
            xs: vec![1.5, f64::INFINITY, f64::NEG_INFINITY],
            ys: vec![None, Some(f64::INFINITY)],
        };
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"xs":[1.5,"inf","-inf"],"ys":[null,"inf"]}"#);
        assert_eq!(serde_json::from_str::<T>(&s).unwrap(), t);
    }

    #[test]
    fn subspace_round_trip() {
        let fam = spin_family();
        let t = TargetValues::new(vec![0.0, 0.0, 0.1]);
        let m = build_amc(&fam, &t, 3, 0.3).unwrap();
        let file = SubspaceFile::new(&m, &fam, &t);
        let text = serde_json::to_string(&file).unwrap();
        let back: SubspaceFile = serde_json::from_str(&text).unwrap();
        let (m2, fam2, t2) = back.load().unwrap();
        assert_eq!(m2.basis, m.basis);
        assert_eq!(m2.provenance, m.provenance);
        assert_eq!(m2.approximant_error, m.approximant_error);
        assert_eq!(fam2.labels(), fam.labels());
        assert_eq!(t2.v, t.v);
    }
}
