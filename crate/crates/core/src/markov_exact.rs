//! Exact law of the symmetric Gambler's Ruin duration by dynamic programming
//! on the absorbing chain over the interior states `{-k+1, ..., k-1}`.
//!
//! Each step moves the sub-probability vector one step (up with probability
//! `p`, down with `1 - p`) and harvests the mass that lands on `+k` or `-k`.
//! The chain is tridiagonal, so a step costs `O(k)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::DurationDist;
use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::scalar::{complement, Scalar};

/// Hard cap on DP horizons grown automatically.
pub const MAX_AUTO_HORIZON: u64 = 50_000_000;

/// Step-up probability `p` and barrier `k` of the walk started at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkParams<S> {
    p: S,
    k: usize,
}

impl<S: Scalar> WalkParams<S> {
    pub fn new(p: S, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("barrier k must be at least 1"));
        }
        if !(p >= S::zero() && p <= S::one()) {
            return Err(Error::invalid(format!("p = {} is not in [0, 1]", p.to_repr())));
        }
        Ok(WalkParams { p, k })
    }

    pub fn p(&self) -> &S {
        &self.p
    }

    pub fn q(&self) -> S {
        complement(&self.p)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The same walk with up and down swapped.
    pub fn mirrored(&self) -> Self {
        WalkParams {
            p: self.q(),
            k: self.k,
        }
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.p.clone(), k)
    }

    pub fn to_f64(&self) -> WalkParams<f64> {
        WalkParams {
            p: self.p.to_f64(),
            k: self.k,
        }
    }
}

/// Sub-probability vector over the interior states, index `level + k - 1`.
#[derive(Debug, Clone)]
pub(crate) struct InteriorMass<S> {
    p: S,
    q: S,
    cur: Vec<S>,
    next: Vec<S>,
}

impl<S: Scalar> InteriorMass<S> {
    pub(crate) fn at_level(params: &WalkParams<S>, level: i64) -> Self {
        let width = 2 * params.k - 1;
        let mut cur = vec![S::zero(); width];
        cur[(level + params.k as i64 - 1) as usize] = S::one();
        InteriorMass {
            p: params.p.clone(),
            q: params.q(),
            cur,
            next: vec![S::zero(); width],
        }
    }

    /// One step; returns the mass absorbed at `(+k, -k)`.
    pub(crate) fn step(&mut self) -> (S, S) {
        let width = self.cur.len();
        for slot in self.next.iter_mut() {
            *slot = S::zero();
        }
        let mut up_absorbed = S::zero();
        let mut down_absorbed = S::zero();
        for j in 0..width {
            let m = &self.cur[j];
            if m.is_zero() {
                continue;
            }
            let up = self.p.clone() * m;
            let down = self.q.clone() * m;
            if j + 1 < width {
                self.next[j + 1] += up;
            } else {
                up_absorbed = up;
            }
            if j > 0 {
                self.next[j - 1] += down;
            } else {
                down_absorbed = down;
            }
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        (up_absorbed, down_absorbed)
    }

    pub(crate) fn remaining(&self) -> S {
        let mut acc = S::zero();
        for m in &self.cur {
            acc += m;
        }
        acc
    }
}

fn check_horizon(k: usize, horizon: u64) -> Result<()> {
    if horizon < k as u64 {
        return Err(Error::invalid(format!("horizon {horizon} is below the barrier k = {k}")));
    }
    Ok(())
}

/// `P(T = n)` for every `n <= horizon`, plus `P(T > horizon)` as truncation mass.
pub fn duration_pmf<S: Scalar>(params: &WalkParams<S>, horizon: u64) -> Result<DurationDist<S>> {
    check_horizon(params.k, horizon)?;
    let mut chain = InteriorMass::at_level(params, 0);
    let mut mass = vec![S::zero(); horizon as usize + 1];
    for n in 1..=horizon {
        let (up, down) = chain.step();
        mass[n as usize] = up + down;
    }
    let k = params.k as u64;
    Ok(DurationDist::from_dense_unchecked(k, k, mass, chain.remaining()))
}

/// `P(T > n)`, exact in exact mode.
pub fn duration_tail<S: Scalar>(params: &WalkParams<S>, n: u64) -> Result<S> {
    let mut chain = InteriorMass::at_level(params, 0);
    for _ in 0..n {
        chain.step();
    }
    Ok(chain.remaining())
}

/// `P(T > n)` for `n = 0..=n_max`.
pub fn duration_tails<S: Scalar>(params: &WalkParams<S>, n_max: u64) -> Vec<S> {
    let mut chain = InteriorMass::at_level(params, 0);
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(S::one());
    for _ in 0..n_max {
        chain.step();
        out.push(chain.remaining());
    }
    out
}

/// Probability of exiting at `+k` before `-k`: `p^k / (p^k + (1-p)^k)`.
pub fn win_prob<S: Scalar>(params: &WalkParams<S>) -> S {
    let up = num_traits::pow(params.p.clone(), params.k);
    let down = num_traits::pow(params.q(), params.k);
    let total = up.clone() + down;
    up / total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Plus,
    Minus,
}

/// Joint law of the duration and the side of exit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDurationWinner<S> {
    k: u64,
    plus: Vec<S>,
    minus: Vec<S>,
    truncation_mass: S,
}

impl<S: Scalar> JointDurationWinner<S> {
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn horizon(&self) -> u64 {
        self.plus.len() as u64 - 1
    }

    pub fn prob(&self, n: u64, winner: Winner) -> S {
        let side = match winner {
            Winner::Plus => &self.plus,
            Winner::Minus => &self.minus,
        };
        side.get(n as usize).cloned().unwrap_or_else(S::zero)
    }

    pub fn truncation_mass(&self) -> &S {
        &self.truncation_mass
    }

    /// Marginal law of the duration.
    pub fn duration(&self) -> DurationDist<S> {
        let mass = self
            .plus
            .iter()
            .zip(&self.minus)
            .map(|(a, b)| a.clone() + b)
            .collect();
        DurationDist::from_dense_unchecked(self.k, self.k, mass, self.truncation_mass.clone())
    }

    /// `P(exit at +k, T <= horizon)`.
    pub fn plus_mass(&self) -> S {
        let mut acc = S::zero();
        for m in &self.plus {
            acc += m;
        }
        acc
    }

    /// `P(T = n, +k) - P(T = n) * win_prob` at each support point. Identically
    /// zero exactly when the duration is independent of the winner.
    pub fn independence_residuals(&self, win: &S) -> Vec<(u64, S)> {
        (self.k..=self.horizon())
            .step_by(2)
            .map(|n| {
                let i = n as usize;
                let total = self.plus[i].clone() + &self.minus[i];
                (n, self.plus[i].clone() - total * win)
            })
            .collect()
    }
}

/// Same DP as [`duration_pmf`], harvesting `+k` and `-k` separately.
pub fn joint_duration_winner<S: Scalar>(
    params: &WalkParams<S>,
    horizon: u64,
) -> Result<JointDurationWinner<S>> {
    check_horizon(params.k, horizon)?;
    let mut chain = InteriorMass::at_level(params, 0);
    let mut plus = vec![S::zero(); horizon as usize + 1];
    let mut minus = vec![S::zero(); horizon as usize + 1];
    for n in 1..=horizon as usize {
        let (up, down) = chain.step();
        plus[n] = up;
        minus[n] = down;
    }
    Ok(JointDurationWinner {
        k: params.k as u64,
        plus,
        minus,
        truncation_mass: chain.remaining(),
    })
}

/// Largest probability, over interior starting states, of surviving `2k`
/// steps. Mass beyond `n` decays at least like this factor per `2k` steps.
pub fn survival_contraction<S: Scalar>(params: &WalkParams<S>) -> S {
    let k = params.k as i64;
    let mut worst = S::zero();
    for level in (-k + 1)..k {
        let mut chain = InteriorMass::at_level(params, level);
        for _ in 0..2 * k {
            chain.step();
        }
        let left = chain.remaining();
        if left > worst {
            worst = left;
        }
    }
    worst
}

/// Smallest horizon at which the truncation mass drops to `tol` or below.
pub fn horizon_for_tolerance(params: &WalkParams<f64>, tol: f64) -> Result<u64> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let rho = survival_contraction(params);
    let period = 2 * params.k as u64;
    let bound = if rho <= 0.0 {
        period
    } else {
        let blocks = (tol.ln() / rho.ln()).ceil().max(0.0);
        period.saturating_mul(blocks as u64 + 1)
    };
    let cap = bound.min(MAX_AUTO_HORIZON);
    let mut chain = InteriorMass::at_level(params, 0);
    for n in 1..=cap {
        chain.step();
        if n >= params.k as u64 && chain.remaining() <= tol {
            return Ok(n);
        }
    }
    Err(Error::ResourceLimit {
        what: format!("truncation mass still above {tol} at horizon {cap}"),
        partial: chain.remaining(),
    })
}

/// Smallest `n` with `P(T <= n) >= level`.
pub fn quantile<S: Scalar>(params: &WalkParams<S>, level: &S) -> Result<u64> {
    if !(*level <= S::one()) {
        return Err(Error::invalid("quantile level must be at most 1"));
    }
    let mut chain = InteriorMass::at_level(params, 0);
    let target = complement(level);
    for n in 1..=MAX_AUTO_HORIZON {
        chain.step();
        if chain.remaining() <= target {
            return Ok(n);
        }
    }
    Err(Error::ResourceLimit {
        what: "quantile not reached".into(),
        partial: chain.remaining().to_f64(),
    })
}

/// `E[T]`. Exact backends solve `(I - Q) t = 1` on the interior states;
/// float backends sum tails until the certified remainder is below
/// `tail_tol`.
pub fn expected_duration<S: Scalar>(params: &WalkParams<S>, tail_tol: f64) -> Result<S> {
    if S::EXACT {
        mean_by_linear_solve(params)
    } else {
        mean_by_tail_sum(params, tail_tol)
    }
}

/// Expected absorption time from 0 via the tridiagonal solve.
pub fn mean_by_linear_solve<S: Scalar>(params: &WalkParams<S>) -> Result<S> {
    let width = 2 * params.k - 1;
    let p = params.p.clone();
    let q = params.q();
    let sub = vec![S::zero() - q; width];
    let diag = vec![S::one(); width];
    let sup = vec![S::zero() - p; width];
    let rhs = vec![S::one(); width];
    let t = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    Ok(t[params.k - 1].clone())
}

fn mean_by_tail_sum<S: Scalar>(params: &WalkParams<S>, tail_tol: f64) -> Result<S> {
    if !(tail_tol > 0.0) {
        return Err(Error::invalid("tail tolerance must be positive in float mode"));
    }
    let rho = survival_contraction(params).to_f64();
    let block = 2.0 * params.k as f64;
    let mut chain = InteriorMass::at_level(params, 0);
    // E[T] = sum_{n >= 0} P(T > n).
    let mut sum = S::one();
    for _ in 0..MAX_AUTO_HORIZON {
        chain.step();
        let left = chain.remaining();
        let remainder_bound = if rho < 1.0 {
            block * left.to_f64() / (1.0 - rho)
        } else {
            f64::INFINITY
        };
        sum += left;
        if remainder_bound <= tail_tol {
            return Ok(sum);
        }
    }
    Err(Error::ResourceLimit {
        what: "tail sum for the expected duration did not converge".into(),
        partial: sum.to_f64(),
    })
}

/// One ordering failure found by [`tail_monotonicity_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailViolation {
    pub n: u64,
    pub p_low: String,
    pub p_high: String,
    pub tail_low: f64,
    pub tail_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSweepReport {
    pub k: usize,
    pub n_max: u64,
    pub p_grid: Vec<String>,
    /// `tails[j][n] = P(T > n)` at the j-th grid point, as f64 for display.
    #[serde(skip)]
    pub tails: Vec<Vec<f64>>,
    pub comparisons: usize,
    pub violations: Vec<TailViolation>,
}

impl TailSweepReport {
    pub fn ordered(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `P(T > n)` is nondecreasing in `p` on `[0, 1/2]` and
/// nonincreasing on `[1/2, 1]` for every `n <= n_max`, comparing adjacent
/// points of an ascending grid. Pairs straddling 1/2 are not compared.
pub fn tail_monotonicity_sweep<S: Scalar>(k: usize, p_grid: &[S], n_max: u64) -> Result<TailSweepReport> {
    if p_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("p grid must be ascending"));
    }
    let params: Vec<WalkParams<S>> = p_grid
        .iter()
        .map(|p| WalkParams::new(p.clone(), k))
        .collect::<Result<_>>()?;
    let tails: Vec<Vec<S>> = params.par_iter().map(|w| duration_tails(w, n_max)).collect();

    let half = S::half();
    let mut comparisons = 0;
    let mut violations = Vec::new();
    for j in 0..p_grid.len().saturating_sub(1) {
        let (lo, hi) = (&p_grid[j], &p_grid[j + 1]);
        let increasing = *hi <= half;
        let decreasing = *lo >= half;
        if !increasing && !decreasing {
            continue;
        }
        for n in 0..=n_max as usize {
            comparisons += 1;
            let (a, b) = (&tails[j][n], &tails[j + 1][n]);
            let ok = if increasing { a <= b } else { a >= b };
            if !ok {
                violations.push(TailViolation {
                    n: n as u64,
                    p_low: lo.to_repr(),
                    p_high: hi.to_repr(),
                    tail_low: a.to_f64(),
                    tail_high: b.to_f64(),
                });
            }
        }
    }
    Ok(TailSweepReport {
        k,
        n_max,
        p_grid: p_grid.iter().map(Scalar::to_repr).collect(),
        tails: tails
            .iter()
            .map(|row| row.iter().map(Scalar::to_f64).collect())
            .collect(),
        comparisons,
        violations,
    })
}
