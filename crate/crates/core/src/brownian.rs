//! Exit time of Brownian motion with drift `mu` from `[-k, k]`.
//!
//! The density is the theta-type series
//!
//! ```text
//! f(t) = (e^{-mu k} + e^{mu k}) e^{-mu^2 t / 2}
//!        * sum_i (k + 4ik) / (sqrt(2 pi) t^{3/2}) * exp(-(k + 4ik)^2 / (2t))
//! ```
//!
//! summed symmetrically in `i`. Tails and moments come from adaptive
//! quadrature; nothing here relies on closed-form moments. The scaled
//! random-walk approximation and an Euler simulation give two independent
//! routes to the same law.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::DurationDist;
use crate::error::{Error, Result};
use crate::markov_exact::{duration_pmf, mean_by_linear_solve, WalkParams, MAX_AUTO_HORIZON};
use crate::quadrature::integrate;
use crate::simulation::{run_parallel, Merge, RngStream, MAX_STEPS};

/// Left end of the first quadrature panel; below it the density is
/// numerically zero for every barrier of practical size.
pub const T_MIN: f64 = 1e-8;

pub const DEFAULT_SERIES_TOL: f64 = 1e-17;

/// Remainder target used when `t_max` is chosen automatically.
pub const TAIL_TARGET: f64 = 1e-10;

/// Relative barrier mismatch `|K sqrt(h) - k| / k` above which the random
/// walk approximation flags a rounding warning.
pub const ROUNDING_WARNING: f64 = 1e-3;

const MAX_PAIRS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrownianExit {
    pub mu: f64,
    pub k: f64,
    /// Per-pair absolute truncation threshold for the series.
    pub series_tol: f64,
    /// Fixed integration horizon; `None` picks one adaptively.
    pub t_max: Option<f64>,
}

impl BrownianExit {
    pub fn new(mu: f64, k: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid(format!("drift must be finite, got {mu}")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("barrier must be positive, got {k}")));
        }
        Ok(BrownianExit {
            mu,
            k,
            series_tol: DEFAULT_SERIES_TOL,
            t_max: None,
        })
    }

    pub fn with_series_tol(mut self, series_tol: f64) -> Result<Self> {
        if !(series_tol > 0.0) {
            return Err(Error::invalid("series tolerance must be positive"));
        }
        self.series_tol = series_tol;
        Ok(self)
    }

    pub fn with_t_max(mut self, t_max: f64) -> Result<Self> {
        if !(t_max > T_MIN && t_max.is_finite()) {
            return Err(Error::invalid(format!("t_max must exceed {T_MIN}, got {t_max}")));
        }
        self.t_max = Some(t_max);
        Ok(self)
    }

    /// `(e^{-mu k} + e^{mu k}) e^{-mu^2 t / 2}` without overflow.
    fn prefactor(&self, t: f64) -> f64 {
        let m = self.mu.abs();
        (m * self.k - 0.5 * m * m * t).exp() * (1.0 + (-2.0 * m * self.k).exp())
    }
}

/// One density evaluation together with its truncation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityEval {
    pub t: f64,
    pub value: f64,
    /// Number of `(i, -i)` pairs summed after the `i = 0` term.
    pub pairs: usize,
    /// Per-pair threshold used to stop.
    pub per_term_bound: f64,
}

impl DensityEval {
    /// `per_term_bound * pairs`.
    pub fn truncation_bound(&self) -> f64 {
        self.per_term_bound * self.pairs.max(1) as f64
    }
}

fn series_term(a: f64, t: f64) -> f64 {
    a / ((2.0 * PI).sqrt() * t * t.sqrt()) * (-a * a / (2.0 * t)).exp()
}

fn density_eval(be: &BrownianExit, t: f64) -> DensityEval {
    let pre = be.prefactor(t);
    let k = be.k;
    let mut sum = series_term(k, t);
    let mut quiet = 0;
    let mut pairs = 0;
    // Past the peak of |a| exp(-a^2 / 2t) the terms fall off like exp(-i^2),
    // so two quiet pairs there end the sum.
    let past_peak = t.sqrt() + k;
    for i in 1..=MAX_PAIRS {
        let shift = 4.0 * i as f64 * k;
        let pair = series_term(k + shift, t) + series_term(k - shift, t);
        sum += pair;
        pairs = i;
        if (pre * pair).abs() < be.series_tol {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 2 && shift > past_peak {
            break;
        }
    }
    DensityEval {
        t,
        value: pre * sum,
        pairs,
        per_term_bound: be.series_tol,
    }
}

/// Density evaluation with its truncation certificate.
pub fn exit_density_eval(be: &BrownianExit, t: f64) -> Result<DensityEval> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("density needs t > 0, got {t}")));
    }
    Ok(density_eval(be, t))
}

pub fn exit_density(be: &BrownianExit, t: f64) -> Result<f64> {
    exit_density_eval(be, t).map(|e| e.value)
}

/// Doubling panel edges `T_MIN * 2^j` inside `(T_MIN, upper)`.
fn geometric_breakpoints(upper: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = 2.0 * T_MIN;
    while x < upper {
        out.push(x);
        x *= 2.0;
    }
    out
}

fn integrate_density(be: &BrownianExit, upper: f64, quad_tol: f64) -> Result<f64> {
    if upper <= T_MIN {
        return Ok(upper * density_eval(be, upper).value.max(0.0));
    }
    let q = integrate(|t| density_eval(be, t).value, &geometric_breakpoints(upper), T_MIN, upper, quad_tol)?;
    // Density is increasing on (0, T_MIN], so T_MIN * f(T_MIN) bounds the
    // skipped piece; it is zero in double precision for k >= 1e-3.
    Ok(q.value + T_MIN * density_eval(be, T_MIN).value.max(0.0))
}

fn check_quad_tol(quad_tol: f64) -> Result<()> {
    if !(quad_tol > 0.0) {
        return Err(Error::invalid(format!("quadrature tolerance must be positive, got {quad_tol}")));
    }
    Ok(())
}

/// `P(T > t) = 1 - int_0^t f`.
pub fn exit_tail(be: &BrownianExit, t: f64, quad_tol: f64) -> Result<f64> {
    check_quad_tol(quad_tol)?;
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("tail needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - integrate_density(be, t, quad_tol)?)
}

/// Estimate of `int_t^inf f` from the local log-slope of the density.
/// `None` while the density is not yet decaying at `t`.
fn remainder_estimate(be: &BrownianExit, t: f64) -> Option<f64> {
    let near = density_eval(be, 0.5 * t).value;
    let far = density_eval(be, t).value;
    if far <= f64::MIN_POSITIVE {
        return Some(0.0);
    }
    if near <= far {
        return None;
    }
    let rate = (near / far).ln() / (0.5 * t);
    Some(far / rate)
}

/// Horizon beyond which the remainder estimate is below `target`, with that
/// estimate. A fixed `be.t_max` is used as given.
pub fn adaptive_t_max(be: &BrownianExit, target: f64) -> Result<(f64, f64)> {
    if let Some(t_max) = be.t_max {
        let rest = remainder_estimate(be, t_max).unwrap_or(f64::INFINITY);
        return Ok((t_max, rest));
    }
    let mut t = (be.k * be.k).max(1e-3);
    for _ in 0..64 {
        if let Some(rest) = remainder_estimate(be, t) {
            if rest < target {
                return Ok((t, rest));
            }
        }
        t *= 2.0;
    }
    Err(Error::ResourceLimit {
        what: "no horizon with a small enough remainder".into(),
        partial: t,
    })
}

/// Density samples plus the normalization check over `(0, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub mu: f64,
    pub k: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub t_max: f64,
    /// `int_0^{t_max} f`.
    pub est_norm: f64,
    /// Estimate of `int_{t_max}^inf f`.
    pub tail_beyond: f64,
    /// `|1 - est_norm - tail_beyond|`.
    pub norm_defect: f64,
}

pub fn density_grid(be: &BrownianExit, times: &[f64], quad_tol: f64) -> Result<DensityGrid> {
    check_quad_tol(quad_tol)?;
    let values = times
        .iter()
        .map(|&t| exit_density(be, t))
        .collect::<Result<Vec<_>>>()?;
    let (t_max, tail_beyond) = adaptive_t_max(be, TAIL_TARGET)?;
    let est_norm = integrate_density(be, t_max, quad_tol)?;
    Ok(DensityGrid {
        mu: be.mu,
        k: be.k,
        times: times.to_vec(),
        values,
        t_max,
        est_norm,
        tail_beyond,
        norm_defect: (1.0 - est_norm - tail_beyond).abs(),
    })
}

/// `E[T^order]` by quadrature, with a remainder beyond the adaptive horizon
/// bounded through the same exponential envelope.
pub fn exit_moment(be: &BrownianExit, order: u32, quad_tol: f64) -> Result<f64> {
    check_quad_tol(quad_tol)?;
    let (t_max, rest) = adaptive_t_max(be, quad_tol.min(TAIL_TARGET))?;
    let q = integrate(
        |t| t.powi(order as i32) * density_eval(be, t).value,
        &geometric_breakpoints(t_max),
        T_MIN,
        t_max,
        quad_tol,
    )?;
    // For an exponential tail with mass `rest` starting at t_max the moment
    // contribution is about t_max^order * rest to leading order.
    Ok(q.value + t_max.powi(order as i32) * rest)
}

pub fn exit_mean(be: &BrownianExit, quad_tol: f64) -> Result<f64> {
    exit_moment(be, 1, quad_tol)
}

/// Ordering check for one consecutive pair of drifts at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuMargin {
    pub mu_low: f64,
    pub mu_high: f64,
    pub t: f64,
    /// `tail(mu_low, t) - tail(mu_high, t)`; should be `>= -2 quad_tol`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuSweepReport {
    pub k: f64,
    pub quad_tol: f64,
    pub mu_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `tails[j][m]` is `P(T_{mu_j} > t_m)`.
    pub tails: Vec<Vec<f64>>,
    pub margins: Vec<MuMargin>,
    pub min_margin: f64,
    pub ordered: bool,
}

/// Checks that exit-time tails are nonincreasing in `mu >= 0` at every `t`.
pub fn monotonicity_sweep(k: f64, mu_grid: &[f64], t_grid: &[f64], quad_tol: f64) -> Result<MuSweepReport> {
    check_quad_tol(quad_tol)?;
    if mu_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::invalid("drift and time grids must be non-empty"));
    }
    if mu_grid.iter().any(|&m| !(m >= 0.0)) {
        return Err(Error::invalid("drift grid must be nonnegative"));
    }
    if mu_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("drift grid must be ascending"));
    }
    for &mu in mu_grid {
        BrownianExit::new(mu, k)?;
    }
    let tails: Vec<Vec<f64>> = mu_grid
        .par_iter()
        .map(|&mu| {
            let be = BrownianExit::new(mu, k)?;
            t_grid.iter().map(|&t| exit_tail(&be, t, quad_tol)).collect()
        })
        .collect::<Result<_>>()?;
    let mut margins = Vec::new();
    for j in 1..mu_grid.len() {
        for (m, &t) in t_grid.iter().enumerate() {
            margins.push(MuMargin {
                mu_low: mu_grid[j - 1],
                mu_high: mu_grid[j],
                t,
                margin: tails[j - 1][m] - tails[j][m],
            });
        }
    }
    let min_margin = margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min);
    Ok(MuSweepReport {
        k,
        quad_tol,
        mu_grid: mu_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        tails,
        ordered: margins.iter().all(|m| m.margin >= -2.0 * quad_tol),
        margins,
        min_margin,
    })
}

/// Law of `h T` for the walk with `p = (1 + mu sqrt(h)) / 2` and barrier
/// `K = round(k / sqrt(h))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RwApproxExit {
    pub mu: f64,
    pub k: f64,
    pub h: f64,
    pub p: f64,
    pub big_k: usize,
    /// `|K sqrt(h) - k| / k`.
    pub barrier_mismatch: f64,
    pub rounding_warning: bool,
    /// Step-count law up to `ceil(horizon / h)` steps.
    #[serde(skip)]
    pub dist: DurationDist<f64>,
    #[serde(skip)]
    tails: Vec<f64>,
}

impl RwApproxExit {
    pub fn horizon_time(&self) -> f64 {
        self.dist.horizon() as f64 * self.h
    }

    /// `P(h T > t) = P(T > floor(t / h))`.
    pub fn scaled_tail(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("tail needs t >= 0, got {t}")));
        }
        let n = (t / self.h + 1e-9).floor() as u64;
        self.tails
            .get(n as usize)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("t = {t} lies beyond the computed horizon {}", self.horizon_time())))
    }

    /// `h E[T]` from the interior linear system.
    pub fn scaled_mean(&self) -> Result<f64> {
        let params = WalkParams::new(self.p, self.big_k)?;
        Ok(self.h * mean_by_linear_solve(&params)?)
    }
}

pub fn rw_approx_exit_dist(mu: f64, k: f64, h: f64, horizon: f64) -> Result<RwApproxExit> {
    BrownianExit::new(mu, k)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {h}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be a nonnegative time, got {horizon}")));
    }
    let p = 0.5 * (1.0 + mu * h.sqrt());
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "step h = {h} is too large for drift {mu}: p(h) = {p} is not a probability"
        )));
    }
    let big_k = (k / h.sqrt()).round().max(1.0) as usize;
    let barrier_mismatch = (big_k as f64 * h.sqrt() - k).abs() / k;
    let steps = (horizon / h).ceil() as u64;
    if steps > MAX_AUTO_HORIZON {
        return Err(Error::ResourceLimit {
            what: format!("{steps} steps exceed the horizon limit"),
            partial: 0.0,
        });
    }
    let dist = duration_pmf(&WalkParams::new(p, big_k)?, steps)?;
    let tails = dist.tails();
    Ok(RwApproxExit {
        mu,
        k,
        h,
        p,
        big_k,
        barrier_mismatch,
        rounding_warning: barrier_mismatch > ROUNDING_WARNING,
        dist,
        tails,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub big_k: usize,
    pub p: f64,
    pub rounding_warning: bool,
    pub tails: Vec<f64>,
    /// Largest `|scaled tail - quadrature tail|` over the time grid.
    pub sup_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub mu: f64,
    pub k: f64,
    pub t_grid: Vec<f64>,
    pub reference_tails: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
    /// Sup distances strictly decrease along the given step sequence.
    pub decreasing: bool,
}

/// Scaled random-walk tails against the quadrature tails for each step in
/// `hs` (normally given in decreasing order).
pub fn bridge_convergence(mu: f64, k: f64, hs: &[f64], t_grid: &[f64], quad_tol: f64) -> Result<ConvergenceReport> {
    if hs.is_empty() || t_grid.is_empty() {
        return Err(Error::invalid("step and time grids must be non-empty"));
    }
    let be = BrownianExit::new(mu, k)?;
    let reference_tails = t_grid
        .iter()
        .map(|&t| exit_tail(&be, t, quad_tol))
        .collect::<Result<Vec<_>>>()?;
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let rows = hs
        .par_iter()
        .map(|&h| {
            let approx = rw_approx_exit_dist(mu, k, h, horizon)?;
            let tails = t_grid
                .iter()
                .map(|&t| approx.scaled_tail(t))
                .collect::<Result<Vec<_>>>()?;
            let sup_distance = tails
                .iter()
                .zip(&reference_tails)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(ConvergenceRow {
                h,
                big_k: approx.big_k,
                p: approx.p,
                rounding_warning: approx.rounding_warning,
                tails,
                sup_distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].sup_distance < w[0].sup_distance);
    Ok(ConvergenceReport {
        mu,
        k,
        t_grid: t_grid.to_vec(),
        reference_tails,
        rows,
        decreasing,
    })
}

/// One Euler draw of the exit time on a grid of width `dt`. Between grid
/// points the Brownian-bridge crossing probability of the nearer barrier
/// decides whether the path left unseen; the time reported is the end of the
/// step in which the exit happened.
pub fn simulate_bm_exit<R: Rng + ?Sized>(mu: f64, k: f64, dt: f64, rng: &mut R) -> Result<f64> {
    let sd = dt.sqrt();
    let mut x = 0.0f64;
    let mut steps = 0u64;
    loop {
        if steps == MAX_STEPS {
            return Err(Error::ResourceLimit {
                what: format!("Brownian path exceeded {MAX_STEPS} steps"),
                partial: steps as f64 * dt,
            });
        }
        steps += 1;
        let z: f64 = rng.sample(StandardNormal);
        let next = x + mu * dt + sd * z;
        if next.abs() >= k {
            return Ok(steps as f64 * dt);
        }
        let cross_up = (-2.0 * (k - x) * (k - next) / dt).exp();
        let cross_down = (-2.0 * (k + x) * (k + next) / dt).exp();
        if rng.random::<f64>() < cross_up + cross_down {
            return Ok(steps as f64 * dt);
        }
        x = next;
    }
}

/// Sorted simulated exit times.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BmExitSample {
    pub times: Vec<f64>,
}

impl Merge for BmExitSample {
    fn merge(&mut self, other: Self) {
        self.times.extend(other.times);
    }
}

impl BmExitSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Empirical `P(T > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        let at_most = self.times.partition_point(|&x| x <= t);
        1.0 - at_most as f64 / self.times.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.times.iter().sum::<f64>() / self.times.len() as f64
    }
}

pub fn run_bm_exits(mu: f64, k: f64, dt: f64, trials: u64, stream: RngStream, workers: usize) -> Result<BmExitSample> {
    BrownianExit::new(mu, k)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let mut sample = run_parallel(trials, stream, workers, BmExitSample::default(), |rng, count| {
        let times = (0..count)
            .map(|_| simulate_bm_exit(mu, k, dt, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(BmExitSample { times })
    })?;
    sample.times.sort_by(f64::total_cmp);
    Ok(sample)
}
