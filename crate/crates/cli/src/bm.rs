use clap::Args;
use serde_json::json;

use ruin_core::brownian::{
    bridge_convergence, density_grid, exit_density_eval, exit_mean, exit_tail, monotonicity_sweep, run_bm_exits,
    BrownianExit, DEFAULT_SERIES_TOL,
};
use ruin_core::simulation::RngStream;
use ruin_core::Scalar;

use crate::output::{Artifact, OutputArgs};
use crate::parse;
use crate::CliError;

const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// Largest tolerated `|1 - int f|` for a density grid.
const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Args)]
pub struct ExitArgs {
    /// Drift.
    #[arg(long, allow_negative_numbers = true, value_parser = parse::number)]
    pub mu: f64,
    /// Barrier half-width: the motion stops at +k or -k.
    #[arg(long, value_parser = parse::number)]
    pub k: f64,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,
}

impl ExitArgs {
    fn exit(&self) -> Result<BrownianExit, CliError> {
        Ok(BrownianExit::new(self.mu, self.k)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub exit: ExitArgs,
    /// Evaluation times, "a:b:step" or a comma list.
    #[arg(long, value_parser = parse::float_grid)]
    pub times: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SERIES_TOL)]
    pub series_tol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub exit: ExitArgs,
    #[arg(long, value_parser = parse::float_grid)]
    pub times: ::std::vec::Vec<f64>,
    /// Also simulate this many Euler paths for comparison.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse::number)]
    pub k: f64,
    /// Ascending nonnegative drifts.
    #[arg(long, value_parser = parse::float_grid)]
    pub mu_grid: ::std::vec::Vec<f64>,
    #[arg(long, value_parser = parse::float_grid)]
    pub t_grid: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub exit: ExitArgs,
    /// Walk time steps, normally decreasing.
    #[arg(long, value_parser = parse::float_grid)]
    pub hs: ::std::vec::Vec<f64>,
    #[arg(long, value_parser = parse::float_grid)]
    pub t_grid: ::std::vec::Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn density(args: &DensityArgs) -> Result<Artifact, CliError> {
    let times = &args.times;
    let be = args.exit.exit()?.with_series_tol(args.series_tol)?;
    let grid = density_grid(&be, times, args.exit.quad_tol)?;
    let mut art = Artifact::new("bm-density", &["t", "f", "pairs", "bound"]);
    for &t in times {
        let e = exit_density_eval(&be, t)?;
        art.push([t.to_repr(), e.value.to_repr(), e.pairs.to_string(), e.truncation_bound().to_repr()]);
    }
    art.violated = !(grid.norm_defect <= NORM_TOLERANCE);
    art.summary = format!(
        "bm-density mu={} k={}: int f over (0, {:.4}] = {:.12}, beyond {:.1e}, defect {:.1e}",
        args.exit.mu, args.exit.k, grid.t_max, grid.est_norm, grid.tail_beyond, grid.norm_defect
    );
    art.json = serde_json::to_value(&grid)?;
    Ok(art)
}

pub fn tail(args: &TailArgs) -> Result<Artifact, CliError> {
    let be = args.exit.exit()?;
    let sample = match args.trials {
        Some(n) => Some(run_bm_exits(args.exit.mu, args.exit.k, args.dt, n, RngStream::new(args.seed, 0), args.workers)?),
        None => None,
    };
    let header: &[&str] = if sample.is_some() { &["t", "tail", "simulated"] } else { &["t", "tail"] };
    let mut art = Artifact::new("bm-tail", header);
    let mut tails = Vec::with_capacity(args.times.len());
    for &t in &args.times {
        let v = exit_tail(&be, t, args.exit.quad_tol)?;
        tails.push(v);
        let mut row = vec![t.to_repr(), v.to_repr()];
        if let Some(s) = &sample {
            row.push(s.tail(t).to_repr());
        }
        art.rows.push(row);
    }
    let mean = exit_mean(&be, args.exit.quad_tol)?;
    art.json = json!({
        "mu": args.exit.mu,
        "k": args.exit.k,
        "times": args.times,
        "tails": tails,
        "mean": mean,
        "simulated": sample.as_ref().map(|s| args.times.iter().map(|&t| s.tail(t)).collect::<Vec<_>>()),
    });
    art.summary = format!("bm-tail mu={} k={}: E[T] = {mean:.10}", args.exit.mu, args.exit.k);
    Ok(art)
}

pub fn sweep(args: &SweepArgs) -> Result<Artifact, CliError> {
    let report = monotonicity_sweep(args.k, &args.mu_grid, &args.t_grid, args.quad_tol)?;
    let mut art = Artifact::new("bm-sweep", &[]);
    art.header = std::iter::once("t".to_string())
        .chain(report.mu_grid.iter().map(|mu| format!("mu={mu}")))
        .collect();
    for (m, t) in report.t_grid.iter().enumerate() {
        let mut row = vec![t.to_repr()];
        row.extend(report.tails.iter().map(|col| col[m].to_repr()));
        art.rows.push(row);
    }
    art.violated = !report.ordered;
    art.summary = format!(
        "bm-sweep k={}: {} (min margin {:.3e} over {} comparisons)",
        args.k,
        if report.ordered { "ordered" } else { "NOT ordered" },
        report.min_margin,
        report.margins.len()
    );
    art.json = serde_json::to_value(&report)?;
    Ok(art)
}

pub fn converge(args: &ConvergeArgs) -> Result<Artifact, CliError> {
    let report = bridge_convergence(args.exit.mu, args.exit.k, &args.hs, &args.t_grid, args.exit.quad_tol)?;
    let mut art = Artifact::new("bm-converge", &["h", "big_k", "p", "rounding_warning", "sup_distance"]);
    for r in &report.rows {
        art.push([r.h.to_repr(), r.big_k.to_string(), r.p.to_repr(), r.rounding_warning.to_string(), r.sup_distance.to_repr()]);
        if r.rounding_warning {
            eprintln!("warning: h = {} puts the scaled barrier {} off k by more than 0.1%", r.h, r.big_k);
        }
    }
    art.violated = !report.decreasing;
    art.summary = format!(
        "bm-converge mu={} k={}: sup distance {} with shrinking step",
        args.exit.mu,
        args.exit.k,
        if report.decreasing { "decreases" } else { "DOES NOT decrease" }
    );
    art.json = serde_json::to_value(&report)?;
    Ok(art)
}
