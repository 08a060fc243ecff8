use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use natslab::io::{write_json, OperatorFile, SubspaceFile};
use natslab::microcanonical::{build_amc, condition2_defect, theorem1_report, Condition2Bounds, Provenance, Theorem1Report};
use natslab::resource::{
    passivity_check, payoff_operator, second_laws_check, work_extraction_search, WorkSearchResult,
};
use natslab::typicality::{typicality_trial_with_state, TypicalityEstimate};
use natslab::{build_nats, fit_potentials, HermitianOperator};

use crate::args::{AmcCommand, Command, GlobalArgs, NatsCommand, ResourceCommand, TypicalityCommand};
use crate::error::{blame, CliError};
use crate::scenario::{load_state, load_subspace, parse_alpha_grid, Scenario};

/// Fit tolerance for the thermal state used by `amc verify` and `typicality run`.
const REFERENCE_FIT_TOL: f64 = 1e-10;

/// Rendered reports, written only after every computation has finished.
#[derive(Debug, Default)]
pub struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_json(value, &mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
        self.0.push((path.to_path_buf(), buf));
        Ok(())
    }

    fn text(&mut self, path: &Path, text: String) {
        self.0.push((path.to_path_buf(), text.into_bytes()));
    }

    pub fn flush(self) -> Result<(), CliError> {
        for (path, bytes) in self.0 {
            let res = if path.as_os_str() == "-" {
                let mut out = std::io::stdout().lock();
                out.write_all(&bytes).and_then(|_| out.flush())
            } else {
                std::fs::write(&path, &bytes)
            };
            res.map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

pub fn run(command: Command, global: &GlobalArgs) -> Result<Outputs, CliError> {
    let mut out = Outputs::default();
    let base = Scenario {
        seed: global.seed,
        out: global.out.clone(),
        ..Default::default()
    };
    match command {
        Command::Nats(c) => nats(c, base, &mut out)?,
        Command::Amc(c) => amc(c, base, &mut out)?,
        Command::Typicality(c) => typicality(c, base, &mut out)?,
        Command::Resource(c) => resource(c, base, &mut out)?,
    }
    Ok(out)
}

fn nats(c: NatsCommand, base: Scenario, out: &mut Outputs) -> Result<(), CliError> {
    match c {
        NatsCommand::Fit { charges, values, tol } => {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(CliError::invalid("--tol", "must be positive"));
            }
            let s = Scenario { charges: charges.charges, values, ..base };
            s.validate()?;
            let family = s.family()?;
            let targets = s.targets(&family)?;
            let params = fit_potentials(&family, &targets, tol).map_err(blame("--values"))?;
            out.json(&s.out, &params)
        }
        NatsCommand::Build { charges, mu } => {
            let s = Scenario { charges: charges.charges, mu, ..base };
            s.validate()?;
            let family = s.family()?;
            let gamma = build_nats(&family, s.potentials(&family)?).map_err(blame("--mu"))?;
            out.json(&s.out, &OperatorFile::from_operator(gamma.as_operator()))
        }
    }
}

/// Site report plus the condition-2 bounds at the verification windows.
#[derive(Debug, Serialize)]
struct VerifyReport {
    provenance: Provenance,
    approximant_error: Option<f64>,
    #[serde(flatten)]
    report: Theorem1Report,
    eta_prime: f64,
    delta_prime: f64,
    condition2: Condition2Bounds,
}

fn amc(c: AmcCommand, base: Scenario, out: &mut Outputs) -> Result<(), CliError> {
    match c {
        AmcCommand::Build { charges, values, copies, eta } => {
            let s = Scenario {
                charges: charges.charges,
                values,
                copies: Some(copies),
                eta: Some(eta),
                ..base
            };
            s.validate()?;
            let family = s.family()?;
            let targets = s.targets(&family)?;
            let m = build_amc(&family, &targets, copies, eta).map_err(blame("--copies"))?;
            out.json(&s.out, &SubspaceFile::new(&m, &family, &targets))
        }
        AmcCommand::Verify { subspace, eta_prime, delta_prime, csv } => {
            let s = Scenario {
                eta_prime: Some(eta_prime),
                delta_prime: Some(delta_prime),
                ..base
            };
            s.validate()?;
            let (m, family, targets) = load_subspace(&subspace)?;
            let nats = fit_potentials(&family, &targets, REFERENCE_FIT_TOL).map_err(blame("--subspace"))?;
            let report = theorem1_report(&m, &family, &targets, &nats).map_err(blame("--subspace"))?;
            let condition2 =
                condition2_defect(&m, &family, &targets, eta_prime, delta_prime).map_err(blame("--eta-prime"))?;
            let table = csv.map(|path| (path, site_table(&report)));
            out.json(
                &s.out,
                &VerifyReport {
                    provenance: m.provenance,
                    approximant_error: m.approximant_error,
                    report,
                    eta_prime,
                    delta_prime,
                    condition2,
                },
            )?;
            if let Some((path, text)) = table {
                out.text(&path, text);
            }
            Ok(())
        }
    }
}

fn site_table(r: &Theorem1Report) -> String {
    let mut s = String::from("site,relative_entropy,trace_distance,entropy,pinsker_holds\n");
    for site in &r.sites {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{}",
            site.site, site.relative_entropy, site.trace_distance, site.entropy, site.pinsker_holds
        );
    }
    s
}

fn typicality(c: TypicalityCommand, base: Scenario, out: &mut Outputs) -> Result<(), CliError> {
    let TypicalityCommand::Run { subspace, charges, values, samples, summary } = c;
    let (m, stored_family, stored_targets) = load_subspace(&subspace)?;
    let s = Scenario {
        charges,
        values: if values.is_empty() { stored_targets.v.clone() } else { values },
        samples: Some(samples),
        ..base
    };
    s.validate()?;
    let family = if s.charges.is_empty() { stored_family } else { s.family()? };
    if family.site_dim() != m.site_dim {
        return Err(CliError::invalid(
            "--charges",
            format!("site dimension {} does not match the subspace ({})", family.site_dim(), m.site_dim),
        ));
    }
    let targets = s.targets(&family)?;
    let params = fit_potentials(&family, &targets, REFERENCE_FIT_TOL).map_err(blame("--values"))?;
    let gamma = build_nats(&family, &params.mu).map_err(blame("--values"))?;
    let est = typicality_trial_with_state(&m, &gamma, samples, s.seed).map_err(blame("--subspace"))?;
    out.text(&s.out, sample_table(&est));
    if let Some(path) = summary {
        out.json(&path, &TypicalityEstimate { records: Vec::new(), ..est })?;
    }
    Ok(())
}

fn sample_table(est: &TypicalityEstimate) -> String {
    let mut s = String::from("sample,site,dist_reduced,dist_nats\n");
    for r in &est.records {
        let _ = writeln!(s, "{},{},{:.16e},{:.16e}", r.sample, r.site, r.dist_reduced, r.dist_nats);
    }
    s
}

#[derive(Debug, Serialize)]
struct ExtractReport {
    copies: usize,
    constrained: bool,
    #[serde(flatten)]
    search: WorkSearchResult,
}

fn resource(c: ResourceCommand, base: Scenario, out: &mut Outputs) -> Result<(), CliError> {
    match c {
        ResourceCommand::SecondLaws { charges, mu, rho, sigma, alpha_grid } => {
            let s = Scenario {
                charges: charges.charges,
                mu: mu.mu,
                alphas: parse_alpha_grid(&alpha_grid)?,
                ..base
            };
            s.validate()?;
            let family = s.family()?;
            let mu = s.potentials(&family)?;
            let rho = load_state("--rho", &rho)?;
            let sigma = load_state("--sigma", &sigma)?;
            let verdict = second_laws_check(&rho, &sigma, &family, mu, &s.alphas).map_err(|e| match e {
                natslab::Error::InvalidArgument(m) if m.contains("alpha") => CliError::invalid("--alpha-grid", m),
                natslab::Error::DimensionMismatch { .. } => CliError::invalid("--rho/--sigma", e),
                other => blame("--mu")(other),
            })?;
            out.json(&s.out, &verdict)
        }
        ResourceCommand::Passivity { charges, mu, rho } => {
            let s = Scenario { charges: charges.charges, mu: mu.mu, ..base };
            s.validate()?;
            let family = s.family()?;
            let w = payoff_operator(&family, s.potentials(&family)?).map_err(blame("--mu"))?;
            let rho = load_state("--rho", &rho)?;
            let result = passivity_check(&rho, &w).map_err(blame("--rho"))?;
            out.json(&s.out, &result)
        }
        ResourceCommand::Extract { charges, mu, rho, copies, trials, unconstrained } => {
            if trials == 0 {
                return Err(CliError::invalid("--trials", "must be at least 1"));
            }
            let s = Scenario {
                charges: charges.charges,
                mu: mu.mu,
                copies: Some(copies),
                ..base
            };
            s.validate()?;
            let family = s.family()?;
            let mu = s.potentials(&family)?;
            let rho = load_state("--rho", &rho)?;
            if rho.dim() != family.site_dim() {
                return Err(CliError::invalid(
                    "--rho",
                    format!("dimension {} does not match the charges ({})", rho.dim(), family.site_dim()),
                ));
            }
            let totals = family.totals(copies).map_err(blame("--copies"))?;
            let w = payoff_operator(&totals, mu).map_err(blame("--mu"))?;
            let state = rho.tensor_power(copies).map_err(blame("--copies"))?;
            let constraint: &[HermitianOperator] = if unconstrained { &[] } else { totals.charges() };
            let search = work_extraction_search(&state, &w, constraint, trials, s.seed).map_err(blame("--rho"))?;
            out.json(
                &s.out,
                &ExtractReport {
                    copies,
                    constrained: !unconstrained,
                    search,
                },
            )
        }
    }
}
