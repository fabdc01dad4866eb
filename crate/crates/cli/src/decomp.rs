use clap::Args;
use serde_json::json;

use ruin_core::decomposition::{
    conditioned_chain, even_k_geometric_check, hazard_rates, reconstruct_geometric, reconstruct_subgame,
    return_prob, subgame_schedule,
};
use ruin_core::markov_exact::duration_pmf;
use ruin_core::{DurationDist, Scalar};

use crate::output::{Artifact, OutputArgs};
use crate::{CliError, WalkArgs};

#[derive(Debug, Clone, Args)]
pub struct UchainArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RebuildArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub horizon: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub k: usize,
    /// Number of subgames listed.
    #[arg(long)]
    pub n_max: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HazardArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n_max: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rebuild {
    Geometric,
    Subgame,
    EvenK,
}

impl Rebuild {
    fn name(self) -> &'static str {
        match self {
            Rebuild::Geometric => "decomp-geo",
            Rebuild::Subgame => "decomp-sub",
            Rebuild::EvenK => "evenk",
        }
    }
}

pub fn uchain(args: &UchainArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &UchainArgs) -> Result<Artifact, CliError> {
        let chain = conditioned_chain(&args.walk.params::<S>()?);
        let residuals = chain.recursion_residuals();
        let mut art = Artifact::new("uchain", &["level", "u", "residual"]);
        for (i, u) in chain.values().iter().enumerate() {
            let r = residuals.get(i).map(Scalar::to_repr).unwrap_or_default();
            art.push([i.to_string(), u.to_repr(), r]);
        }
        let worst = residuals.iter().map(|r| r.to_f64().abs()).fold(0.0, f64::max);
        art.violated = if S::EXACT {
            residuals.iter().any(|r| *r != S::from_u64(0))
        } else {
            worst > S::SUM_TOLERANCE
        };
        art.json = json!({
            "k": args.walk.k,
            "p": args.walk.p.to_string(),
            "u": chain.values().iter().map(Scalar::to_repr).collect::<Vec<_>>(),
            "residuals": residuals.iter().map(Scalar::to_repr).collect::<Vec<_>>(),
        });
        art.summary = format!(
            "uchain k={} p={}: {} levels, max recursion residual {worst:e}",
            args.walk.k,
            args.walk.p,
            chain.values().len()
        );
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}

pub fn returnprob(args: &UchainArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &UchainArgs) -> Result<Artifact, CliError> {
        let value = return_prob(&args.walk.params::<S>()?)?.to_repr();
        let mut art = Artifact::new("returnprob", &["k", "p", "return_prob"]);
        art.push([args.walk.k.to_string(), args.walk.p.to_string(), value.clone()]);
        art.json = json!({ "k": args.walk.k, "p": args.walk.p.to_string(), "return_prob": value });
        art.summary = format!("returnprob k={} p={}: {value}", args.walk.k, args.walk.p);
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}

pub fn rebuild(args: &RebuildArgs, how: Rebuild) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &RebuildArgs, how: Rebuild) -> Result<Artifact, CliError> {
        let params = args.walk.params::<S>()?;
        let dp = duration_pmf(&params, args.horizon)?;
        let rebuilt: DurationDist<S> = match how {
            Rebuild::Geometric => reconstruct_geometric(&params, args.horizon)?,
            Rebuild::Subgame => reconstruct_subgame(&params, args.horizon)?,
            Rebuild::EvenK => even_k_geometric_check(&params, args.horizon)?.reconstructed,
        };
        let mut art = Artifact::new(how.name(), &["n", "dp", "reconstructed"]);
        for n in dp.support_min()..=args.horizon {
            let (a, b) = (dp.pmf(n), rebuilt.pmf(n));
            if a != S::from_u64(0) || b != S::from_u64(0) {
                art.push([n.to_string(), a.to_repr(), b.to_repr()]);
            }
        }
        let diff = dp.max_abs_diff(&rebuilt);
        let matches = if S::EXACT { dp.agrees_exactly(&rebuilt) } else { diff.to_f64() <= S::SUM_TOLERANCE };
        art.violated = !matches;
        art.json = json!({
            "k": args.walk.k,
            "p": args.walk.p.to_string(),
            "horizon": args.horizon,
            "dp": dp.to_record(),
            "reconstructed": rebuilt.to_record(),
            "max_abs_diff": diff.to_repr(),
            "matches": matches,
        });
        art.summary = format!(
            "{} k={} p={} horizon={}: {} (max |diff| {})",
            how.name(),
            args.walk.k,
            args.walk.p,
            args.horizon,
            if matches { "matches the exact law" } else { "DOES NOT match the exact law" },
            diff.to_repr()
        );
        Ok(art)
    }
    match args.walk.mode {
        crate::Mode::Exact => body::<ruin_core::Rational>(args, how),
        crate::Mode::Float => body::<f64>(args, how),
    }
}

pub fn schedule(args: &ScheduleArgs) -> Result<Artifact, CliError> {
    let sched = subgame_schedule(args.k, args.n_max)?;
    let mut art = Artifact::new("schedule", &["i", "d", "y"]);
    for i in 1..=sched.len() {
        art.push([i.to_string(), sched.d(i).to_string(), sched.y(i).to_string()]);
    }
    let (start, length) = sched.period();
    art.json = json!({ "schedule": sched, "period_start": start, "period_length": length });
    art.summary = format!("schedule k={}: offsets cycle from game {start} with period {length}", args.k);
    Ok(art)
}

pub fn hazards(args: &HazardArgs) -> Result<Artifact, CliError> {
    fn body<S: Scalar>(args: &HazardArgs) -> Result<Artifact, CliError> {
        let rates = hazard_rates(&args.walk.params::<S>()?, args.n_max)?;
        let counts = rates.count_pmf();
        let mut art = Artifact::new("hazards", &["n", "y_prev", "d", "r", "count_pmf"]);
        for n in 1..=args.n_max {
            art.push([
                n.to_string(),
                rates.schedule.y(n - 1).to_string(),
                rates.schedule.d(n).to_string(),
                rates.r(n).to_repr(),
                counts[n - 1].to_repr(),
            ]);
        }
        let mut alive = S::one();
        for c in &counts {
            alive -= c;
        }
        art.json = serde_json::to_value(&rates)?;
        art.summary = format!(
            "hazards k={} p={}: P(N > {}) = {}",
            args.walk.k,
            args.walk.p,
            args.n_max,
            alive.to_repr()
        );
        Ok(art)
    }
    by_mode!(args.walk.mode, body(args))
}
