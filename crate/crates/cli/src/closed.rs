use clap::{Args, ValueEnum};
use serde_json::json;

use ruin_core::closed_form::{cross_validate, feller_pmf, karni_pmf_with, FellerConvention, KarniTerms};
use ruin_core::markov_exact::duration_pmf;
use ruin_core::Scalar;

use crate::output::{Artifact, OutputArgs};
use crate::{CliError, WalkArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    /// Constant as commonly printed (twice the true value).
    AsPrinted,
    /// Rescaled so the value at n = k matches the exact law.
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Terms {
    /// The five printed binomial terms; correct up to n = 5k.
    AsPrinted,
    /// The full alternating series.
    Complete,
}

#[derive(Debug, Clone, Args)]
pub struct FellerArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n_max: u64,
    #[arg(long, value_enum, default_value_t = Convention::Calibrated)]
    pub convention: Convention,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct KarniArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n_max: u64,
    #[arg(long, value_enum, default_value_t = Terms::Complete)]
    pub terms: Terms,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct XvalArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n_max: u64,
    /// Largest tolerated deviation from the exact law.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Closed form next to the dynamic program at every support point.
fn against_dp(
    name: &'static str,
    walk: &WalkArgs,
    n_max: u64,
    label: &str,
    f: impl Fn(u64) -> Result<f64, CliError>,
) -> Result<Artifact, CliError> {
    let params = walk.float_params()?;
    if n_max < walk.k as u64 {
        return Err(CliError::Usage(format!("--n-max must be at least k = {}", walk.k)));
    }
    let dp = duration_pmf(&params, n_max)?;
    let mut art = Artifact::new(name, &["n", "value", "dp", "abs_diff"]);
    let mut worst = 0.0f64;
    let mut entries = Vec::new();
    for (n, exact) in dp.entries() {
        let value = f(n)?;
        let diff = (value - exact).abs();
        worst = worst.max(diff);
        art.push([n.to_string(), value.to_repr(), exact.to_repr(), diff.to_repr()]);
        entries.push(json!({ "n": n, "value": value, "dp": exact, "abs_diff": diff }));
    }
    art.json = json!({ "k": walk.k, "p": walk.p.to_string(), "form": label, "entries": entries, "max_abs_diff": worst });
    art.summary = format!("{name} ({label}) k={} p={}: max |value - dp| = {worst:e}", walk.k, walk.p);
    Ok(art)
}

pub fn feller(args: &FellerArgs) -> Result<Artifact, CliError> {
    let params = args.walk.float_params()?;
    let (convention, label) = match args.convention {
        Convention::AsPrinted => (FellerConvention::AsPrinted, "as-printed"),
        Convention::Calibrated => (FellerConvention::Calibrated, "calibrated"),
    };
    against_dp("feller", &args.walk, args.n_max, label, |n| Ok(feller_pmf(&params, n, convention)?))
}

pub fn karni(args: &KarniArgs) -> Result<Artifact, CliError> {
    let params = args.walk.float_params()?;
    let (terms, label) = match args.terms {
        Terms::AsPrinted => (KarniTerms::AsPrinted, "as-printed"),
        Terms::Complete => (KarniTerms::Complete, "complete"),
    };
    against_dp("karni", &args.walk, args.n_max, label, |n| Ok(karni_pmf_with(&params, n, terms)))
}

pub fn xval(args: &XvalArgs) -> Result<Artifact, CliError> {
    let report = cross_validate(&args.walk.float_params()?, args.n_max)?;
    let mut art = Artifact::new(
        "xval",
        &["n", "feller_printed", "feller", "karni", "karni_printed", "dp", "abs_diff"],
    );
    for e in &report.entries {
        art.push([
            e.n.to_string(),
            e.feller_printed.to_repr(),
            e.feller_value.to_repr(),
            e.karni_value.map(|v| v.to_repr()).unwrap_or_default(),
            e.karni_printed_value.to_repr(),
            e.dp_value.to_repr(),
            e.abs_diff.to_repr(),
        ]);
    }
    let worst = report.max_feller_abs_diff.max(report.max_karni_abs_diff.unwrap_or(0.0));
    art.violated = !(worst <= args.tol);
    art.summary = format!(
        "xval k={} p={}: max deviation {worst:e}; printed cosine-sum ratio {}",
        args.walk.k,
        args.walk.p,
        report.constant_ratio_estimate.map(|r| format!("{r:.12}")).unwrap_or_else(|| "n/a".into())
    );
    for finding in &report.findings {
        eprintln!("note: {finding}");
    }
    art.json = serde_json::to_value(&report)?;
    Ok(art)
}
