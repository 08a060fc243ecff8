use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "natslab", version, about = "Thermal states and resource checks for noncommuting charges")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output path; `-` writes to stdout.
    #[arg(long, global = true, default_value = "-")]
    pub out: PathBuf,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit or build the thermal state.
    #[command(subcommand)]
    Nats(NatsCommand),
    /// Build and certify approximate microcanonical subspaces.
    #[command(subcommand)]
    Amc(AmcCommand),
    /// Sample pure states on a subspace.
    #[command(subcommand)]
    Typicality(TypicalityCommand),
    /// Second laws, passivity and work extraction.
    #[command(subcommand)]
    Resource(ResourceCommand),
}

#[derive(Debug, Subcommand)]
pub enum NatsCommand {
    /// Fit potentials to target expectation values.
    Fit {
        #[command(flatten)]
        charges: ChargeArgs,
        #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Write the thermal state for given potentials.
    Build {
        #[command(flatten)]
        charges: ChargeArgs,
        #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
        mu: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AmcCommand {
    /// Build the subspace for N copies.
    Build {
        #[command(flatten)]
        charges: ChargeArgs,
        #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        copies: usize,
        #[arg(long, default_value_t = 0.15)]
        eta: f64,
    },
    /// Evaluate both conditions and the site-reduction report.
    Verify {
        #[arg(long)]
        subspace: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eta_prime: f64,
        #[arg(long, default_value_t = 0.02)]
        delta_prime: f64,
        /// Per-site CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TypicalityCommand {
    /// Per-sample, per-site distances as CSV.
    Run {
        #[arg(long)]
        subspace: PathBuf,
        /// Charges for the thermal state; defaults to those stored with the subspace.
        #[arg(long, num_args = 1..)]
        charges: Vec<PathBuf>,
        /// Targets for the thermal state; defaults to those stored with the subspace.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Summary statistics as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ResourceCommand {
    /// Check every free-energy monotone for rho -> sigma.
    SecondLaws {
        #[command(flatten)]
        charges: ChargeArgs,
        #[command(flatten)]
        mu: MuArgs,
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        sigma: PathBuf,
        /// `start:step:stop` or a comma-separated list.
        #[arg(long, default_value = "0:0.1:4")]
        alpha_grid: String,
    },
    /// Passivity of rho with respect to the payoff.
    Passivity {
        #[command(flatten)]
        charges: ChargeArgs,
        #[command(flatten)]
        mu: MuArgs,
        #[arg(long)]
        rho: PathBuf,
    },
    /// Random search for payoff extraction from copies of rho.
    Extract {
        #[command(flatten)]
        charges: ChargeArgs,
        #[command(flatten)]
        mu: MuArgs,
        #[arg(long)]
        rho: PathBuf,
        #[arg(long, default_value_t = 1)]
        copies: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Draw from all unitaries rather than those conserving the totals.
        #[arg(long)]
        unconstrained: bool,
    },
}

#[derive(Debug, Args)]
pub struct ChargeArgs {
    /// Charge operator files, Hamiltonian first.
    #[arg(long, required = true, num_args = 1..)]
    pub charges: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MuArgs {
    #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu: Vec<f64>,
}
