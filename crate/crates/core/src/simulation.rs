//! Monte Carlo engine: plain walk draws, the monotone coupling of
//! conditioned return times, and empirical stochastic-dominance checks.
//!
//! Trials are split into fixed-size chunks and chunk `c` always draws from
//! stream `(stream << 32) | c`, so aggregate statistics do not depend on the
//! number of worker threads. Aggregation only adds integer counts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::conditioned_chain;
use crate::error::{Error, Result};
use crate::markov_exact::{WalkParams, Winner};

/// Per-trajectory step cap.
pub const MAX_STEPS: u64 = 1_000_000_000;

/// Trials per independently seeded chunk.
pub const CHUNK_TRIALS: u64 = 8192;

/// Seed and stream id; identical pairs give identical sample sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Stream for chunk `index`; the low 32 bits of the stream id are
    /// reserved for chunk indices.
    pub fn chunk(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream: (self.stream << 32) | (index & 0xffff_ffff),
        }
    }
}

fn step_cap_error(what: &str, steps: u64) -> Error {
    Error::ResourceLimit {
        what: format!("{what} exceeded {MAX_STEPS} steps"),
        partial: steps as f64,
    }
}

/// One draw of `(T, exit side)`.
pub fn simulate_walk<R: Rng + ?Sized>(params: &WalkParams<f64>, rng: &mut R) -> Result<(u64, Winner)> {
    let k = params.k() as i64;
    let p = *params.p();
    let mut position = 0i64;
    let mut steps = 0u64;
    while position.abs() < k {
        if steps == MAX_STEPS {
            return Err(step_cap_error("walk", steps));
        }
        position += if rng.random::<f64>() < p { 1 } else { -1 };
        steps += 1;
    }
    Ok((steps, if position > 0 { Winner::Plus } else { Winner::Minus }))
}

/// Conditioned return walks at `p <= p' <= 1/2` driven by shared uniforms
/// whenever they sit on the same level, independent uniforms otherwise.
#[derive(Debug, Clone)]
pub struct ConditionedCoupling {
    k: usize,
    u_low: Vec<f64>,
    u_high: Vec<f64>,
}

impl ConditionedCoupling {
    pub fn new(p: f64, p_prime: f64, k: usize) -> Result<Self> {
        if !(0.0 <= p && p <= p_prime && p_prime <= 0.5) {
            return Err(Error::invalid(format!(
                "coupling needs 0 <= p <= p' <= 1/2, got p = {p}, p' = {p_prime}"
            )));
        }
        if k < 2 {
            return Err(Error::invalid("conditioned return times need k >= 2"));
        }
        let low = conditioned_chain(&WalkParams::new(p, k)?);
        let high = conditioned_chain(&WalkParams::new(p_prime, k)?);
        Ok(ConditionedCoupling {
            k,
            u_low: low.values().to_vec(),
            u_high: high.values().to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// One coupled draw of the return times to 0 from `start`, `(Y(p), Y(p'))`.
    pub fn sample<R: Rng + ?Sized>(&self, start: usize, rng: &mut R) -> Result<(u64, u64)> {
        if start == 0 || start >= self.k {
            return Err(Error::invalid(format!("start level {start} outside 1..{}", self.k)));
        }
        let mut low = start;
        let mut high = start;
        let mut t_low = None;
        let mut t_high = None;
        let mut steps = 0u64;
        while t_high.is_none() {
            if steps == MAX_STEPS {
                return Err(step_cap_error("coupled walk", steps));
            }
            steps += 1;
            let low_alive = t_low.is_none();
            if low_alive && low == high {
                // Shared uniform against ordered thresholds u(p) <= u(p').
                let draw = rng.random::<f64>();
                low = if draw < self.u_low[low - 1] { low + 1 } else { low - 1 };
                high = if draw < self.u_high[high - 1] { high + 1 } else { high - 1 };
            } else {
                if low_alive {
                    let draw = rng.random::<f64>();
                    low = if draw < self.u_low[low - 1] { low + 1 } else { low - 1 };
                }
                let draw = rng.random::<f64>();
                high = if draw < self.u_high[high - 1] { high + 1 } else { high - 1 };
            }
            if low_alive && low == 0 {
                t_low = Some(steps);
            }
            if high == 0 {
                t_high = Some(steps);
            }
        }
        // The high walk can only reach 0 together with or after the low one.
        let t_low = t_low.unwrap_or(steps);
        Ok((t_low, t_high.unwrap_or(steps)))
    }
}

pub fn simulate_conditioned_coupled<R: Rng + ?Sized>(
    p: f64,
    p_prime: f64,
    k: usize,
    start: usize,
    rng: &mut R,
) -> Result<(u64, u64)> {
    ConditionedCoupling::new(p, p_prime, k)?.sample(start, rng)
}

/// Commutative merge of per-chunk aggregates.
pub trait Merge: Sized + Send {
    fn merge(&mut self, other: Self);
}

/// Runs `trials` trials in fixed chunks on `workers` threads (0 = rayon
/// default) and merges the chunk aggregates in chunk order.
pub fn run_parallel<A, F>(trials: u64, stream: RngStream, workers: usize, empty: A, chunk_fn: F) -> Result<A>
where
    A: Merge + Clone + Sync,
    F: Fn(&mut ChaCha8Rng, u64) -> Result<A> + Sync,
{
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let work = || -> Result<Vec<A>> {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let count = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
                let mut rng = stream.chunk(c).rng();
                chunk_fn(&mut rng, count)
            })
            .collect()
    };
    let parts = if workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?
            .install(work)?
    };
    let mut total = empty;
    for part in parts {
        total.merge(part);
    }
    Ok(total)
}

fn merge_histograms(into: &mut BTreeMap<u64, u64>, from: BTreeMap<u64, u64>) {
    for (t, c) in from {
        *into.entry(t).or_insert(0) += c;
    }
}

fn ecdf_from_histogram(hist: &BTreeMap<u64, u64>, trials: u64, t: u64) -> f64 {
    let below: u64 = hist.range(..=t).map(|(_, c)| c).sum();
    below as f64 / trials as f64
}

/// Aggregated plain-walk draws.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WalkRunStats {
    pub trials: u64,
    pub plus_wins: u64,
    pub histogram: BTreeMap<u64, u64>,
    pub sum_duration: u128,
    pub sum_duration_sq: u128,
    /// Sum of durations over trials won at `+k`.
    pub sum_duration_plus: u128,
}

impl Merge for WalkRunStats {
    fn merge(&mut self, other: Self) {
        self.trials += other.trials;
        self.plus_wins += other.plus_wins;
        self.sum_duration += other.sum_duration;
        self.sum_duration_sq += other.sum_duration_sq;
        self.sum_duration_plus += other.sum_duration_plus;
        merge_histograms(&mut self.histogram, other.histogram);
    }
}

impl WalkRunStats {
    pub fn mean(&self) -> f64 {
        self.sum_duration as f64 / self.trials as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.trials as f64;
        let mean = self.mean();
        (self.sum_duration_sq as f64 / n - mean * mean) * n / (n - 1.0)
    }

    pub fn mean_standard_error(&self) -> f64 {
        (self.variance() / self.trials as f64).sqrt()
    }

    pub fn plus_frequency(&self) -> f64 {
        self.plus_wins as f64 / self.trials as f64
    }

    /// Sample correlation between the duration and the `+k` indicator.
    pub fn duration_winner_correlation(&self) -> f64 {
        let n = self.trials as f64;
        let mean_t = self.mean();
        let freq = self.plus_frequency();
        let cov = self.sum_duration_plus as f64 / n - mean_t * freq;
        let var_t = self.sum_duration_sq as f64 / n - mean_t * mean_t;
        let var_w = freq * (1.0 - freq);
        if var_t <= 0.0 || var_w <= 0.0 {
            return 0.0;
        }
        cov / (var_t * var_w).sqrt()
    }

    pub fn ecdf(&self, t: u64) -> f64 {
        ecdf_from_histogram(&self.histogram, self.trials, t)
    }
}

/// Draws `trials` walks.
pub fn run_walks(params: &WalkParams<f64>, trials: u64, stream: RngStream, workers: usize) -> Result<WalkRunStats> {
    run_parallel(trials, stream, workers, WalkRunStats::default(), |rng, count| {
        let mut stats = WalkRunStats::default();
        for _ in 0..count {
            let (t, winner) = simulate_walk(params, rng)?;
            let t128 = t as u128;
            stats.trials += 1;
            stats.sum_duration += t128;
            stats.sum_duration_sq += t128 * t128;
            if winner == Winner::Plus {
                stats.plus_wins += 1;
                stats.sum_duration_plus += t128;
            }
            *stats.histogram.entry(t).or_insert(0) += 1;
        }
        Ok(stats)
    })
}

/// Aggregated coupled draws of `(Y_i(p), Y_i(p'))`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoupledRunStats {
    pub trials: u64,
    /// Draws with `Y(p) > Y(p')`; always zero for a correct coupling.
    pub ordering_violations: u64,
    pub ties: u64,
    pub sum_low: u128,
    pub sum_high: u128,
    pub hist_low: BTreeMap<u64, u64>,
    pub hist_high: BTreeMap<u64, u64>,
}

impl Merge for CoupledRunStats {
    fn merge(&mut self, other: Self) {
        self.trials += other.trials;
        self.ordering_violations += other.ordering_violations;
        self.ties += other.ties;
        self.sum_low += other.sum_low;
        self.sum_high += other.sum_high;
        merge_histograms(&mut self.hist_low, other.hist_low);
        merge_histograms(&mut self.hist_high, other.hist_high);
    }
}

impl CoupledRunStats {
    pub fn mean_low(&self) -> f64 {
        self.sum_low as f64 / self.trials as f64
    }

    pub fn mean_high(&self) -> f64 {
        self.sum_high as f64 / self.trials as f64
    }

    pub fn ecdf_low(&self, t: u64) -> f64 {
        ecdf_from_histogram(&self.hist_low, self.trials, t)
    }

    pub fn ecdf_high(&self, t: u64) -> f64 {
        ecdf_from_histogram(&self.hist_high, self.trials, t)
    }

    /// `(t, ecdf_low, ecdf_high)` at every observed value.
    pub fn ecdf_grid(&self) -> Vec<(u64, f64, f64)> {
        let mut ts: Vec<u64> = self.hist_low.keys().chain(self.hist_high.keys()).copied().collect();
        ts.sort_unstable();
        ts.dedup();
        ts.into_iter()
            .map(|t| (t, self.ecdf_low(t), self.ecdf_high(t)))
            .collect()
    }
}

pub fn run_coupled(
    coupling: &ConditionedCoupling,
    start: usize,
    trials: u64,
    stream: RngStream,
    workers: usize,
) -> Result<CoupledRunStats> {
    run_parallel(trials, stream, workers, CoupledRunStats::default(), |rng, count| {
        let mut stats = CoupledRunStats::default();
        for _ in 0..count {
            let (y, y_prime) = coupling.sample(start, rng)?;
            stats.trials += 1;
            if y > y_prime {
                stats.ordering_violations += 1;
            }
            if y == y_prime {
                stats.ties += 1;
            }
            stats.sum_low += y as u128;
            stats.sum_high += y_prime as u128;
            *stats.hist_low.entry(y).or_insert(0) += 1;
            *stats.hist_high.entry(y_prime).or_insert(0) += 1;
        }
        Ok(stats)
    })
}

/// DKW half-width `sqrt(ln(2/alpha) / (2n))`: with probability at least
/// `1 - alpha` the ECDF stays within this distance of the true CDF everywhere.
pub fn dkw_epsilon(trials: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * trials as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcdfRow {
    pub t: u64,
    pub ecdf_low: f64,
    pub ecdf_high: f64,
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub k: usize,
    pub p_low: f64,
    pub p_high: f64,
    pub trials: u64,
    pub confidence: f64,
    pub band: f64,
    pub rows: Vec<EcdfRow>,
    /// Step counts where `ecdf_high - ecdf_low` exceeds both bands.
    pub violations: Vec<u64>,
    pub holds: bool,
}

impl DominanceReport {
    /// Empirical `P(T > t)` for both parameters.
    pub fn tails_at(&self, t: u64) -> (f64, f64) {
        let row = self.rows.iter().rev().find(|r| r.t <= t);
        match row {
            Some(r) => (1.0 - r.ecdf_low, 1.0 - r.ecdf_high),
            None => (1.0, 1.0),
        }
    }
}

/// Simulates both walks and checks `ECDF_low(t) >= ECDF_high(t)` (the
/// duration at `p_high` is stochastically larger) up to the DKW bands.
pub fn empirical_dominance(
    params_low: &WalkParams<f64>,
    params_high: &WalkParams<f64>,
    trials: u64,
    confidence: f64,
    stream: RngStream,
    workers: usize,
) -> Result<DominanceReport> {
    if params_low.k() != params_high.k() {
        return Err(Error::invalid("both walks must share the barrier k"));
    }
    let (p_low, p_high) = (*params_low.p(), *params_high.p());
    if !(p_low <= p_high && p_high <= 0.5) {
        return Err(Error::invalid("dominance check needs p_low <= p_high <= 1/2"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence must lie in (0, 1)"));
    }
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let low = run_walks(params_low, trials, stream.chunk(0), workers)?;
    let high = run_walks(params_high, trials, stream.chunk(1), workers)?;
    let band = dkw_epsilon(trials, 1.0 - confidence);

    let last = low
        .histogram
        .keys()
        .chain(high.histogram.keys())
        .copied()
        .max()
        .unwrap_or(0);
    let k = params_low.k() as u64;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut cum_low = 0u64;
    let mut cum_high = 0u64;
    for t in (k..=last).step_by(2) {
        cum_low += low.histogram.get(&t).copied().unwrap_or(0);
        cum_high += high.histogram.get(&t).copied().unwrap_or(0);
        let ecdf_low = cum_low as f64 / trials as f64;
        let ecdf_high = cum_high as f64 / trials as f64;
        if ecdf_high - ecdf_low > 2.0 * band {
            violations.push(t);
        }
        rows.push(EcdfRow {
            t,
            ecdf_low,
            ecdf_high,
            band,
        });
    }
    Ok(DominanceReport {
        k: params_low.k(),
        p_low,
        p_high,
        trials,
        confidence,
        band,
        holds: violations.is_empty(),
        rows,
        violations,
    })
}

/// Pearson statistic of a histogram against a pmf, pooling cells whose
/// expected count falls below `min_expected` into their neighbour (and the
/// upper tail into the last cell). Returns `(statistic, degrees of freedom)`.
pub fn chi_square_statistic(
    histogram: &BTreeMap<u64, u64>,
    pmf: impl Fn(u64) -> f64,
    support: impl Iterator<Item = u64>,
    trials: u64,
    min_expected: f64,
) -> (f64, usize) {
    let n = trials as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    let mut covered_prob = 0.0;
    let mut covered_obs = 0u64;
    for t in support {
        let prob = pmf(t);
        let obs = histogram.get(&t).copied().unwrap_or(0);
        covered_prob += prob;
        covered_obs += obs;
        pending.0 += obs as f64;
        pending.1 += prob * n;
        if pending.1 >= min_expected {
            cells.push(pending);
            pending = (0.0, 0.0);
        }
    }
    // Everything outside the enumerated support joins the final cell.
    pending.0 += (trials - covered_obs) as f64;
    pending.1 += (1.0 - covered_prob).max(0.0) * n;
    match cells.last_mut() {
        Some(last) => {
            last.0 += pending.0;
            last.1 += pending.1;
        }
        None => cells.push(pending),
    }
    let stat = cells
        .iter()
        .map(|(obs, exp)| (obs - exp).powi(2) / exp)
        .sum();
    (stat, cells.len().saturating_sub(1))
}
