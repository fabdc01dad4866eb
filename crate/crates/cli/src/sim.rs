use clap::Args;
use serde_json::json;

use ruin_core::markov_exact::duration_pmf;
use ruin_core::simulation::{chi_square_statistic, dkw_epsilon, run_coupled, run_walks, ConditionedCoupling, RngStream};
use ruin_core::Scalar;

use crate::output::{Artifact, OutputArgs};
use crate::parse;
use crate::{CliError, WalkArgs};

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub trials: u64,
    #[command(flatten)]
    pub stream: StreamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CoupleArgs {
    /// Lower up-step probability, at most `--p-prime`.
    #[arg(long, value_parser = parse::probability)]
    pub p: ruin_core::Rational,
    /// Higher up-step probability, at most 1/2.
    #[arg(long, value_parser = parse::probability)]
    pub p_prime: ruin_core::Rational,
    #[arg(long)]
    pub k: usize,
    /// Starting level of the conditioned walks, in 1..k.
    #[arg(long, default_value_t = 1)]
    pub start: usize,
    #[arg(long)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
    #[command(flatten)]
    pub stream: StreamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn simulate(args: &SimulateArgs) -> Result<Artifact, CliError> {
    let params = args.walk.float_params()?;
    let stats = run_walks(&params, args.trials, RngStream::new(args.stream.seed, 0), args.stream.workers)?;
    let mut art = Artifact::new("simulate", &["n", "count", "frequency"]);
    for (n, c) in &stats.histogram {
        art.push([n.to_string(), c.to_string(), (*c as f64 / stats.trials as f64).to_repr()]);
    }
    let longest = stats.histogram.keys().next_back().copied().unwrap_or(0).max(params.k() as u64);
    let exact = duration_pmf(&params, longest)?;
    let (chi2, dof) = chi_square_statistic(
        &stats.histogram,
        |n| exact.pmf(n),
        exact.entries().map(|(n, _)| n),
        stats.trials,
        5.0,
    );
    art.json = json!({
        "k": args.walk.k,
        "p": args.walk.p.to_string(),
        "seed": args.stream.seed,
        "stats": stats,
        "mean": stats.mean(),
        "mean_standard_error": stats.mean_standard_error(),
        "plus_frequency": stats.plus_frequency(),
        "chi_square": chi2,
        "chi_square_dof": dof,
    });
    art.summary = format!(
        "simulate k={} p={} trials={}: mean {:.6} +- {:.6}, P(+k) {:.6}, chi-square {chi2:.2} on {dof} dof",
        args.walk.k,
        args.walk.p,
        stats.trials,
        stats.mean(),
        stats.mean_standard_error(),
        stats.plus_frequency()
    );
    Ok(art)
}

pub fn couple(args: &CoupleArgs) -> Result<Artifact, CliError> {
    let coupling = ConditionedCoupling::new(
        ruin_core::scalar::rational_to_f64(&args.p),
        ruin_core::scalar::rational_to_f64(&args.p_prime),
        args.k,
    )?;
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return Err(CliError::Usage("--confidence must lie in (0, 1)".into()));
    }
    let stats = run_coupled(&coupling, args.start, args.trials, RngStream::new(args.stream.seed, 0), args.stream.workers)?;
    let band = dkw_epsilon(stats.trials, 1.0 - args.confidence);
    let mut art = Artifact::new("couple", &["t", "ecdf_low", "ecdf_high", "band"]);
    for (t, lo, hi) in stats.ecdf_grid() {
        art.push([t.to_string(), lo.to_repr(), hi.to_repr(), band.to_repr()]);
    }
    art.violated = stats.ordering_violations > 0;
    art.json = json!({
        "k": args.k,
        "p": args.p.to_string(),
        "p_prime": args.p_prime.to_string(),
        "start": args.start,
        "seed": args.stream.seed,
        "band": band,
        "mean_low": stats.mean_low(),
        "mean_high": stats.mean_high(),
        "stats": stats,
    });
    art.summary = format!(
        "couple k={} p={} p'={} trials={}: {} ordering violations, {} ties, means {:.6} <= {:.6}",
        args.k,
        args.p,
        args.p_prime,
        stats.trials,
        stats.ordering_violations,
        stats.ties,
        stats.mean_low(),
        stats.mean_high()
    );
    Ok(art)
}
