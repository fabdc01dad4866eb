use clap::Args;
use serde_json::json;

use ruin_core::markov_exact::{
    duration_pmf, duration_tails, expected_duration, joint_duration_winner, quantile, tail_monotonicity_sweep,
    win_prob,
};
use ruin_core::scalar::rational_to_f64;
use ruin_core::simulation::{empirical_dominance, RngStream};
use ruin_core::{Rational, Scalar, WalkParams, Winner};

use crate::output::{Artifact, OutputArgs};
use crate::parse::{self, Horizon};
use crate::{CliError, Mode, WalkArgs};

#[derive(Debug, Clone, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Last step count computed; mass beyond it is reported as truncation.
    #[arg(long)]
    pub horizon: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n_max: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct WinprobArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MeanArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Remainder bound for the float tail sum (ignored in exact mode).
    #[arg(long, default_value_t = 1e-12)]
    pub tail_tol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DominanceArgs {
    #[arg(long)]
    pub k: usize,
    /// Ascending p values, "a:b:step" or a comma list.
    #[arg(long, value_parser = parse::probability_grid)]
    pub p_grid: ::std::vec::Vec<Rational>,
    /// Largest n compared, or "auto" for the 0.999 quantile nearest p = 1/2.
    #[arg(long, value_parser = parse::horizon, default_value = "auto")]
    pub n_max: Horizon,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Compare simulated ECDFs of the first two grid points instead.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn describe(walk: &WalkArgs) -> String {
    format!("k={} p={}", walk.k, walk.p)
}

pub fn pmf(args: &PmfArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &PmfArgs) -> Result<Artifact, CliError> {
        let dist = duration_pmf(&args.walk.params::<S>()?, args.horizon)?;
        let mut art = Artifact::new("pmf", &["n", "prob"]);
        for (n, m) in dist.entries() {
            art.push([n.to_string(), m.to_repr()]);
        }
        art.json = json!({
            "k": args.walk.k,
            "p": args.walk.p.to_string(),
            "distribution": dist.to_record(),
        });
        art.summary = format!(
            "pmf {} horizon={}: {} support points, truncation mass {}",
            describe(&args.walk),
            args.horizon,
            art.rows.len(),
            dist.truncation_mass().to_repr()
        );
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}

pub fn tail(args: &TailArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &TailArgs) -> Result<Artifact, CliError> {
        let tails = duration_tails(&args.walk.params::<S>()?, args.n_max);
        let mut art = Artifact::new("tail", &["n", "tail"]);
        for (n, t) in tails.iter().enumerate() {
            art.push([n.to_string(), t.to_repr()]);
        }
        art.json = json!({
            "k": args.walk.k,
            "p": args.walk.p.to_string(),
            "tails": tails.iter().map(Scalar::to_repr).collect::<Vec<_>>(),
        });
        art.summary = format!(
            "tail {}: P(T > {}) = {}",
            describe(&args.walk),
            args.n_max,
            tails.last().map(Scalar::to_repr).unwrap_or_default()
        );
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}

pub fn winprob(args: &WinprobArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &WinprobArgs) -> Result<Artifact, CliError> {
        let value = win_prob(&args.walk.params::<S>()?).to_repr();
        let mut art = Artifact::new("winprob", &["k", "p", "win_prob"]);
        art.push([args.walk.k.to_string(), args.walk.p.to_string(), value.clone()]);
        art.json = json!({ "k": args.walk.k, "p": args.walk.p.to_string(), "win_prob": value });
        art.summary = format!("winprob {}: {value}", describe(&args.walk));
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}

pub fn joint(args: &PmfArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &PmfArgs) -> Result<Artifact, CliError> {
        let params = args.walk.params::<S>()?;
        let joint = joint_duration_winner(&params, args.horizon)?;
        let residuals = joint.independence_residuals(&win_prob(&params));
        let mut art = Artifact::new("joint", &["n", "plus", "minus", "residual"]);
        let mut worst = 0.0f64;
        for (n, r) in &residuals {
            worst = worst.max(r.to_f64().abs());
            art.push([
                n.to_string(),
                joint.prob(*n, Winner::Plus).to_repr(),
                joint.prob(*n, Winner::Minus).to_repr(),
                r.to_repr(),
            ]);
        }
        let independent = if S::EXACT {
            residuals.iter().all(|(_, r)| *r == S::from_u64(0))
        } else {
            worst <= S::SUM_TOLERANCE
        };
        art.violated = !independent;
        art.json = json!({
            "k": args.walk.k,
            "p": args.walk.p.to_string(),
            "horizon": args.horizon,
            "truncation_mass": joint.truncation_mass().to_repr(),
            "rows": art.rows,
            "independent": independent,
        });
        art.summary = format!(
            "joint {} horizon={}: max |residual| {worst:e}, {}",
            describe(&args.walk),
            args.horizon,
            if independent { "independent" } else { "NOT independent" }
        );
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}

pub fn mean(args: &MeanArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &MeanArgs) -> Result<Artifact, CliError> {
        let value = expected_duration(&args.walk.params::<S>()?, args.tail_tol)?.to_repr();
        let mut art = Artifact::new("mean", &["k", "p", "mean"]);
        art.push([args.walk.k.to_string(), args.walk.p.to_string(), value.clone()]);
        art.json = json!({ "k": args.walk.k, "p": args.walk.p.to_string(), "mean": value });
        art.summary = format!("mean {}: E[T] = {value}", describe(&args.walk));
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}

/// 0.999 quantile at the grid point nearest 1/2, where tails are heaviest.
fn auto_n_max(k: usize, grid: &[Rational]) -> Result<u64, CliError> {
    let nearest = grid
        .iter()
        .map(rational_to_f64)
        .min_by(|a, b| (a - 0.5).abs().total_cmp(&(b - 0.5).abs()))
        .ok_or_else(|| CliError::Usage("empty p grid".into()))?;
    Ok(quantile(&WalkParams::new(nearest, k)?, &0.999)?)
}

pub fn dominance(args: &DominanceArgs) -> Result<Artifact, CliError> {
    if let Some(trials) = args.trials {
        return empirical(args, trials);
    }
    let n_max = match args.n_max {
        Horizon::Fixed(n) => n,
        Horizon::Auto => auto_n_max(args.k, &args.p_grid)?,
    };
    let report = match args.mode {
        Mode::Exact => tail_monotonicity_sweep(args.k, &args.p_grid, n_max)?,
        Mode::Float => {
            let grid: Vec<f64> = args.p_grid.iter().map(rational_to_f64).collect();
            tail_monotonicity_sweep(args.k, &grid, n_max)?
        }
    };
    let mut header = vec!["n".to_string()];
    header.extend(report.p_grid.iter().map(|p| format!("p={p}")));
    let mut art = Artifact::new("dominance", &[]);
    art.header = header;
    for n in 0..=n_max as usize {
        let mut row = vec![n.to_string()];
        row.extend(report.tails.iter().map(|col| col[n].to_repr()));
        art.rows.push(row);
    }
    let ordered = report.ordered();
    art.violated = !ordered;
    art.summary = format!(
        "dominance k={} n_max={n_max}: {} over {} comparisons",
        args.k,
        if ordered { "ordered" } else { "NOT ordered" },
        report.comparisons
    );
    art.json = json!({ "report": report, "ordered": ordered });
    Ok(art)
}

fn empirical(args: &DominanceArgs, trials: u64) -> Result<Artifact, CliError> {
    let [low, high] = args.p_grid.as_slice() else {
        return Err(CliError::Usage("empirical dominance compares exactly two p values".into()));
    };
    let low = WalkParams::new(rational_to_f64(low), args.k)?;
    let high = WalkParams::new(rational_to_f64(high), args.k)?;
    let report = empirical_dominance(&low, &high, trials, args.confidence, RngStream::new(args.seed, 0), args.workers)?;
    let mut art = Artifact::new("dominance", &["t", "ecdf_low", "ecdf_high", "band"]);
    for row in &report.rows {
        art.push([row.t.to_string(), row.ecdf_low.to_repr(), row.ecdf_high.to_repr(), row.band.to_repr()]);
    }
    art.violated = !report.holds;
    art.summary = format!(
        "dominance k={} p={} vs {} ({} trials, band {:.4}): {}",
        args.k,
        report.p_low,
        report.p_high,
        trials,
        report.band,
        if report.holds { "ordered" } else { "NOT ordered" }
    );
    art.json = serde_json::to_value(&report)?;
    Ok(art)
}
