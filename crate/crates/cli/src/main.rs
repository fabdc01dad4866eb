//! `ruin`: command-line front end for `ruin-core`.
//!
//! Every subcommand writes one artifact (CSV or JSON) and prints a one-line
//! summary. Exit status: 0 success, 1 usage or validation error, 2 the
//! computation finished but the property it checks was violated.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ruin_core::{Rational, Scalar, WalkParams};

/// Runs a generic command body in the requested arithmetic.
macro_rules! by_mode {
    ($mode:expr, $f:ident($($arg:expr),* $(,)?)) => {
        match $mode {
            $crate::Mode::Exact => $f::<::ruin_core::Rational>($($arg),*),
            $crate::Mode::Float => $f::<f64>($($arg),*),
        }
    };
}

mod bm;
mod closed;
mod config;
mod decomp;
mod output;
mod parse;
mod sim;
mod walk;

use output::{Artifact, OutputArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ruin_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Arbitrary-precision rationals; every identity holds with equality.
    Exact,
    /// Binary64.
    Float,
}

#[derive(Debug, Clone, Args)]
pub struct WalkArgs {
    /// Up-step probability, "num/den" or a decimal.
    #[arg(long, value_parser = parse::probability)]
    pub p: Rational,
    /// Barrier: the walk stops at +k or -k.
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
}

impl WalkArgs {
    pub fn params<S: Scalar>(&self) -> Result<WalkParams<S>, CliError> {
        Ok(WalkParams::new(S::from_rational(&self.p), self.k)?)
    }

    pub fn float_params(&self) -> Result<WalkParams<f64>, CliError> {
        self.params::<f64>()
    }
}

#[derive(Debug, Parser)]
#[command(name = "ruin", version, about = "Duration of the symmetric Gambler's Ruin: exact laws, decompositions, simulation and the Brownian limit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point probabilities P(T = n) up to a horizon.
    Pmf(walk::PmfArgs),
    /// Tail probabilities P(T > n).
    Tail(walk::TailArgs),
    /// Probability of exiting at +k.
    Winprob(walk::WinprobArgs),
    /// Joint law of duration and exit side, with independence residuals.
    Joint(walk::PmfArgs),
    /// Expected duration.
    Mean(walk::MeanArgs),
    /// Cosine-sum closed form.
    Feller(closed::FellerArgs),
    /// Alternating binomial closed form.
    Karni(closed::KarniArgs),
    /// Both closed forms against the dynamic program.
    Xval(closed::XvalArgs),
    /// Up-step probabilities of the walk conditioned to return to 0.
    Uchain(decomp::UchainArgs),
    /// Probability of returning to 0 before exiting.
    Returnprob(decomp::UchainArgs),
    /// Geometric-sum decomposition rebuilt and compared with the DP.
    DecompGeo(decomp::RebuildArgs),
    /// Sizes and offsets of the subgame schedule.
    Schedule(decomp::ScheduleArgs),
    /// Hazard rates of the number of subgames.
    Hazards(decomp::HazardArgs),
    /// Subgame decomposition rebuilt and compared with the DP.
    DecompSub(decomp::RebuildArgs),
    /// Even-k geometric law of the subgame count.
    Evenk(decomp::RebuildArgs),
    /// Monte Carlo draws of the duration.
    Simulate(sim::SimulateArgs),
    /// Monotone coupling of conditioned return times.
    Couple(sim::CoupleArgs),
    /// Tail ordering in p, exact or empirical.
    Dominance(walk::DominanceArgs),
    /// Exit-time density of Brownian motion with drift.
    BmDensity(bm::DensityArgs),
    /// Exit-time tail by quadrature.
    BmTail(bm::TailArgs),
    /// Tail ordering in the drift.
    BmSweep(bm::SweepArgs),
    /// Scaled random-walk tails converging to the Brownian tails.
    BmConverge(bm::ConvergeArgs),
    /// Run a command described by a TOML file.
    Run(config::RunArgs),
}

pub fn dispatch(command: Command) -> Result<bool, CliError> {
    let (artifact, out): (Artifact, OutputArgs) = match command {
        Command::Pmf(a) => (walk::pmf(&a)?, a.out),
        Command::Tail(a) => (walk::tail(&a)?, a.out),
        Command::Winprob(a) => (walk::winprob(&a)?, a.out),
        Command::Joint(a) => (walk::joint(&a)?, a.out),
        Command::Mean(a) => (walk::mean(&a)?, a.out),
        Command::Feller(a) => (closed::feller(&a)?, a.out),
        Command::Karni(a) => (closed::karni(&a)?, a.out),
        Command::Xval(a) => (closed::xval(&a)?, a.out),
        Command::Uchain(a) => (decomp::uchain(&a)?, a.out),
        Command::Returnprob(a) => (decomp::returnprob(&a)?, a.out),
        Command::DecompGeo(a) => (decomp::rebuild(&a, decomp::Rebuild::Geometric)?, a.out),
        Command::Schedule(a) => (decomp::schedule(&a)?, a.out),
        Command::Hazards(a) => (decomp::hazards(&a)?, a.out),
        Command::DecompSub(a) => (decomp::rebuild(&a, decomp::Rebuild::Subgame)?, a.out),
        Command::Evenk(a) => (decomp::rebuild(&a, decomp::Rebuild::EvenK)?, a.out),
        Command::Simulate(a) => (sim::simulate(&a)?, a.out),
        Command::Couple(a) => (sim::couple(&a)?, a.out),
        Command::Dominance(a) => (walk::dominance(&a)?, a.out),
        Command::BmDensity(a) => (bm::density(&a)?, a.out),
        Command::BmTail(a) => (bm::tail(&a)?, a.out),
        Command::BmSweep(a) => (bm::sweep(&a)?, a.out),
        Command::BmConverge(a) => (bm::converge(&a)?, a.out),
        Command::Run(a) => return config::run(&a),
    };
    artifact.emit(&out)?;
    Ok(!artifact.violated)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version are not errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
