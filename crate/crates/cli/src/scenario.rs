use std::path::{Path, PathBuf};

use natslab::io::{read_json, OperatorFile, SubspaceFile};
use natslab::microcanonical::Subspace;
use natslab::{ChargeFamily, DensityMatrix, TargetValues};

use crate::error::{blame, CliError};

/// Validated inputs of one invocation. Loaders check that files exist and
/// parse; range checks name the flag they apply to.
#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub charges: Vec<PathBuf>,
    pub values: Vec<f64>,
    pub mu: Vec<f64>,
    pub copies: Option<usize>,
    pub eta: Option<f64>,
    pub eta_prime: Option<f64>,
    pub delta_prime: Option<f64>,
    pub alphas: Vec<f64>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.values.iter().chain(&self.mu).any(|x| !x.is_finite()) {
            let field = if self.values.iter().any(|x| !x.is_finite()) { "--values" } else { "--mu" };
            return Err(CliError::invalid(field, "entries must be finite"));
        }
        if self.copies == Some(0) {
            return Err(CliError::invalid("--copies", "must be at least 1"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(CliError::invalid("--eta", "must be positive"));
            }
        }
        if let Some(eta) = self.eta_prime {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(CliError::invalid("--eta-prime", "must be positive"));
            }
        }
        if let Some(d) = self.delta_prime {
            if !(0.0..=1.0).contains(&d) {
                return Err(CliError::invalid("--delta-prime", "must lie in [0, 1]"));
            }
        }
        if self.samples == Some(0) {
            return Err(CliError::invalid("--samples", "must be at least 1"));
        }
        for p in &self.charges {
            if !p.is_file() {
                return Err(CliError::invalid("--charges", format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Charges labelled by file stem.
    pub fn family(&self) -> Result<ChargeFamily, CliError> {
        let mut ops = Vec::with_capacity(self.charges.len());
        let mut labels = Vec::with_capacity(self.charges.len());
        for p in &self.charges {
            let f: OperatorFile = read_json(p).map_err(|e| CliError::invalid("--charges", with_path(p, e)))?;
            ops.push(f.to_operator().map_err(|e| CliError::invalid("--charges", with_path(p, e)))?);
            labels.push(p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
        }
        ChargeFamily::new(ops, labels).map_err(blame("--charges"))
    }

    pub fn targets(&self, family: &ChargeFamily) -> Result<TargetValues, CliError> {
        let t = TargetValues::new(self.values.clone());
        t.validate(family).map_err(blame("--values"))?;
        Ok(t)
    }

    pub fn potentials(&self, family: &ChargeFamily) -> Result<&[f64], CliError> {
        if self.mu.len() != family.len() {
            return Err(CliError::invalid(
                "--mu",
                format!("expected {} entries, one per charge, found {}", family.len(), self.mu.len()),
            ));
        }
        Ok(&self.mu)
    }
}

pub fn load_state(field: &str, path: &Path) -> Result<DensityMatrix, CliError> {
    let f: OperatorFile = read_json(path).map_err(|e| CliError::invalid(field, with_path(path, e)))?;
    f.to_density().map_err(|e| CliError::invalid(field, with_path(path, e)))
}

pub fn load_subspace(path: &Path) -> Result<(Subspace, ChargeFamily, TargetValues), CliError> {
    let f: SubspaceFile = read_json(path).map_err(|e| CliError::invalid("--subspace", with_path(path, e)))?;
    f.load().map_err(|e| CliError::invalid("--subspace", with_path(path, e)))
}

/// `start:step:stop` (inclusive, step counted in integers) or a comma list.
pub fn parse_alpha_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: &str| CliError::invalid("--alpha-grid", format!("{m} in {s:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("unparsable number"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
                return Err(bad("expected finite start <= stop and positive step"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad("expected start:step:stop")),
    }
}

fn with_path(path: &Path, e: natslab::Error) -> String {
    match e {
        natslab::Error::Io(io) => format!("{}: {io}", path.display()),
        natslab::Error::Format(m) => m,
        other => format!("{}: {other}", path.display()),
    }
}
