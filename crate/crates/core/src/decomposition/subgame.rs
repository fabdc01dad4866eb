//! Subgame decomposition: a size-`k` game is played as a random number `N`
//! of smaller symmetric games. The first has size 1; after game `i` the walk
//! sits at `+-y(i)` (or has hit `+-k`), and the next game has size
//! `d(i+1) = k - y(i)`, or 1 when `y(i) = 0`.
//!
//! `N` is independent of the subgame durations, and its hazard rate is
//! `r(n) = pi_{y(n-1)} pi_{d(n)} + (1 - pi_{y(n-1)})(1 - pi_{d(n)})` with
//! `pi_j` the probability of winning a size-`j` game upwards.

use std::collections::HashMap;

use serde::Serialize;

use crate::dist::DurationDist;
use crate::error::{Error, Result};
use crate::markov_exact::{duration_pmf, win_prob, WalkParams};
use crate::scalar::{abs, complement, repr, Scalar};

/// The deterministic sizes `d(i)` and post-game offsets `y(i)`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubgameSchedule {
    pub k: usize,
    /// `y[i - 1] = y(i)`.
    pub y: Vec<usize>,
    /// `d[i - 1] = d(i)`.
    pub d: Vec<usize>,
}

impl SubgameSchedule {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `y(i)` with the convention `y(0) = 0`.
    pub fn y(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.y[i - 1]
        }
    }

    pub fn d(&self, i: usize) -> usize {
        self.d[i - 1]
    }

    /// `(first index of the cycle, cycle length)` of the offset sequence.
    /// The next offset depends only on the current one, so a repeat is
    /// guaranteed within `k + 1` games regardless of the stored length.
    pub fn period(&self) -> (usize, usize) {
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut y = 1;
        let mut i = 1;
        loop {
            if let Some(&first) = seen.get(&y) {
                return (first, i - first);
            }
            seen.insert(y, i);
            y = next_offset(self.k, y).1;
            i += 1;
        }
    }
}

/// `(d(i), y(i))` from `y(i-1)`.
fn next_offset(k: usize, prev: usize) -> (usize, usize) {
    if prev == 0 {
        (1, 1)
    } else {
        let d = k - prev;
        (d, prev.abs_diff(d))
    }
}

pub fn subgame_schedule(k: usize, n_max: usize) -> Result<SubgameSchedule> {
    if k < 2 {
        return Err(Error::invalid("the subgame decomposition needs k > 1"));
    }
    if n_max == 0 {
        return Err(Error::invalid("schedule length must be at least 1"));
    }
    let mut y = Vec::with_capacity(n_max);
    let mut d = Vec::with_capacity(n_max);
    y.push(1);
    d.push(1);
    while y.len() < n_max {
        let (di, yi) = next_offset(k, *y.last().unwrap());
        d.push(di);
        y.push(yi);
    }
    Ok(SubgameSchedule { k, y, d })
}

/// Schedule together with the hazard rates of `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct HazardRates<S: Scalar> {
    pub schedule: SubgameSchedule,
    /// `hazards[n - 1] = r(n)`.
    #[serde(serialize_with = "repr::many")]
    pub hazards: Vec<S>,
}

impl<S: Scalar> HazardRates<S> {
    pub fn r(&self, n: usize) -> &S {
        &self.hazards[n - 1]
    }

    /// `P(N = n)` for `n = 1..=len`.
    pub fn count_pmf(&self) -> Vec<S> {
        let mut alive = S::one();
        self.hazards
            .iter()
            .map(|r| {
                let here = alive.clone() * r;
                alive *= complement(r);
                here
            })
            .collect()
    }
}

fn hazard<S: Scalar>(p: &S, prev_offset: usize, size: usize) -> Result<S> {
    if prev_offset == 0 {
        return Ok(S::zero());
    }
    let pi_y = win_prob(&WalkParams::new(p.clone(), prev_offset)?);
    let pi_d = win_prob(&WalkParams::new(p.clone(), size)?);
    Ok(pi_y.clone() * &pi_d + complement(&pi_y) * complement(&pi_d))
}

/// Hazard rates `r(1..=n_max)`; `r(1) = 0` since `y(0) = 0`.
pub fn hazard_rates<S: Scalar>(params: &WalkParams<S>, n_max: usize) -> Result<HazardRates<S>> {
    let schedule = subgame_schedule(params.k(), n_max)?;
    let hazards = (1..=n_max)
        .map(|n| hazard(params.p(), schedule.y(n - 1), schedule.d(n)))
        .collect::<Result<_>>()?;
    Ok(HazardRates { schedule, hazards })
}

/// Per-call memo of subgame laws keyed by game size; the horizon and the
/// backend are fixed for the lifetime of the table.
struct SubgameLaws<S> {
    p: S,
    horizon: u64,
    laws: HashMap<usize, DurationDist<S>>,
}

impl<S: Scalar> SubgameLaws<S> {
    fn law(&mut self, size: usize) -> Result<DurationDist<S>> {
        if let Some(law) = self.laws.get(&size) {
            return Ok(law.clone());
        }
        let law = if size == 1 {
            DurationDist::point_mass(1, 1, self.horizon)
        } else {
            self.assemble(size)?
        };
        self.laws.insert(size, law.clone());
        Ok(law)
    }

    fn assemble(&mut self, k: usize) -> Result<DurationDist<S>> {
        let horizon = self.horizon;
        let params = WalkParams::new(self.p.clone(), k)?;
        // Every game takes at least one step.
        let rates = hazard_rates(&params, horizon as usize + 1)?;
        let mut mass = vec![S::zero(); horizon as usize + 1];
        // Law of the time to play the first n games.
        let mut elapsed: DurationDist<S> = DurationDist::point_mass(k as u64, 0, horizon);
        let mut alive = S::one();
        for n in 1..=rates.schedule.len() {
            let game = self.law(rates.schedule.d(n))?;
            elapsed = elapsed.convolve(&game, horizon);
            if elapsed.support_min() > horizon {
                break;
            }
            let r = rates.r(n);
            let stop_here = alive.clone() * r;
            if !stop_here.is_zero() {
                for (t, m) in elapsed.entries() {
                    mass[t as usize] += stop_here.clone() * m;
                }
            }
            alive *= complement(r);
            if alive.is_zero() {
                break;
            }
        }
        let mut truncation = S::one();
        for m in &mass {
            truncation -= m;
        }
        Ok(DurationDist::from_dense_unchecked(k as u64, k as u64, mass, truncation))
    }
}

/// Law of `sum_{i=1}^N T^{|d(i)|}` with subgame laws built recursively from
/// the same decomposition (down to the size-1 game, which always takes one
/// step). Uses no direct DP of the size-`k` walk.
pub fn reconstruct_subgame<S: Scalar>(params: &WalkParams<S>, horizon: u64) -> Result<DurationDist<S>> {
    let k = params.k();
    if horizon < k as u64 {
        return Err(Error::invalid(format!("horizon {horizon} is below k = {k}")));
    }
    let mut laws = SubgameLaws {
        p: params.p().clone(),
        horizon,
        laws: HashMap::new(),
    };
    laws.law(k).map(|d| d.with_k(k as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvenKReport<S> {
    pub k: usize,
    /// `pi_{k/2}^2 + (1 - pi_{k/2})^2`.
    pub success_prob: S,
    pub reconstructed: DurationDist<S>,
    pub max_deviation: S,
    pub exact_match: bool,
}

/// For even `k`: `T = sum_{i=1}^N (T_i + T~_i)` with `T_i`, `T~_i` copies of
/// the size-`k/2` duration and `N` geometric with success probability
/// `pi_{k/2}^2 + (1 - pi_{k/2})^2`; compared with the DP law.
pub fn even_k_geometric_check<S: Scalar>(params: &WalkParams<S>, horizon: u64) -> Result<EvenKReport<S>> {
    let k = params.k();
    if k % 2 != 0 || k < 2 {
        return Err(Error::invalid(format!("k = {k} is not a positive even number")));
    }
    let half = params.with_k(k / 2)?;
    let pi = win_prob(&half);
    let success = pi.clone() * &pi + complement(&pi) * complement(&pi);
    let half_law = duration_pmf(&half, horizon)?;
    let round = half_law.convolve(&half_law, horizon);

    let mut mass = vec![S::zero(); horizon as usize + 1];
    let mut weight = success.clone();
    let mut rounds = round.clone();
    loop {
        for (n, m) in rounds.entries() {
            mass[n as usize] += weight.clone() * m;
        }
        weight *= complement(&success);
        if weight.is_zero() {
            break;
        }
        rounds = rounds.convolve(&round, horizon);
        if rounds.support_min() > horizon {
            break;
        }
    }
    let mut truncation = S::one();
    for m in &mass {
        truncation -= m;
    }
    let reconstructed = DurationDist::from_dense_unchecked(k as u64, k as u64, mass, truncation);
    let direct = duration_pmf(params, horizon)?;
    let max_deviation = reconstructed.max_abs_diff(&direct);
    let exact_match = if S::EXACT {
        max_deviation.is_zero()
    } else {
        max_deviation.to_f64() <= 1e-10
    };
    Ok(EvenKReport {
        k,
        success_prob: success,
        reconstructed,
        max_deviation,
        exact_match,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct PiMonotonicityReport<S: Scalar> {
    pub k: usize,
    #[serde(serialize_with = "repr::many")]
    pub grid: Vec<S>,
    #[serde(serialize_with = "repr::many")]
    pub values: Vec<S>,
    pub strictly_increasing: bool,
    /// `pi(0) = 0` and `pi(1/2) = 1/2`.
    pub endpoints_ok: bool,
}

/// Evaluates `pi_k^+` across a grid in `[0, 1/2]` and checks strict increase.
pub fn pi_monotonicity_check<S: Scalar>(k: usize, grid: &[S]) -> Result<PiMonotonicityReport<S>> {
    let half = S::half();
    if grid.iter().any(|p| *p < S::zero() || *p > half) {
        return Err(Error::invalid("grid points must lie in [0, 1/2]"));
    }
    let values: Vec<S> = grid
        .iter()
        .map(|p| WalkParams::new(p.clone(), k).map(|w| win_prob(&w)))
        .collect::<Result<_>>()?;
    let strictly_increasing = values.windows(2).all(|w| w[0] < w[1]);
    let at_zero = win_prob(&WalkParams::new(S::zero(), k)?);
    let at_half = win_prob(&WalkParams::new(half.clone(), k)?);
    let endpoints_ok = if S::EXACT {
        at_zero.is_zero() && at_half == half
    } else {
        at_zero.to_f64().abs() <= S::SUM_TOLERANCE && abs(at_half - half).to_f64() <= S::SUM_TOLERANCE
    };
    Ok(PiMonotonicityReport {
        k,
        grid: grid.to_vec(),
        values,
        strictly_increasing,
        endpoints_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn walk(p: Rational, k: usize) -> WalkParams<Rational> {
        WalkParams::new(p, k).unwrap()
    }

    #[test]
    fn schedules_unroll_the_recurrence() {
        let s = subgame_schedule(3, 6).unwrap();
        assert_eq!(s.d, vec![1, 2, 2, 2, 2, 2]);
        assert_eq!(s.y, vec![1, 1, 1, 1, 1, 1]);
        let s = subgame_schedule(4, 6).unwrap();
        assert_eq!(s.d, vec![1, 3, 2, 1, 3, 2]);
        assert_eq!(s.y, vec![1, 2, 0, 1, 2, 0]);
        assert_eq!(s.period(), (1, 3));
        let s = subgame_schedule(2, 4).unwrap();
        assert_eq!(s.d, vec![1, 1, 1, 1]);
        assert_eq!(s.y, vec![1, 0, 1, 0]);
        assert_eq!(s.period(), (1, 2));
        assert!(subgame_schedule(1, 4).is_err());
        assert!(subgame_schedule(3, 0).is_err());
    }

    #[test]
    fn every_size_is_smaller_than_k() {
        for k in 2..30 {
            let s = subgame_schedule(k, 4 * k).unwrap();
            assert!(s.d.iter().all(|&d| d >= 1 && d < k));
            assert!(s.y.iter().all(|&y| y < k));
            let (start, len) = s.period();
            assert!(start + len <= k + 2);
        }
    }

    #[test]
    fn hazards_for_k2() {
        let p = r(3, 10);
        let rates = hazard_rates(&walk(p.clone(), 2), 8).unwrap();
        let both = p.clone() * &p + complement(&p) * complement(&p);
        for n in 1..=8 {
            let want = if n % 2 == 0 { both.clone() } else { r(0, 1) };
            assert_eq!(*rates.r(n), want, "n = {n}");
        }
    }

    #[test]
    fn hazard_examples() {
        let fair = hazard_rates(&walk(r(1, 2), 4), 4).unwrap();
        assert_eq!(*fair.r(2), r(1, 2));
        let rates = hazard_rates(&walk(r(3, 10), 3), 3).unwrap();
        let pi2 = r(9, 58);
        let pi1 = r(3, 10);
        let want = pi1.clone() * &pi2 + complement(&pi1) * complement(&pi2);
        assert_eq!(*rates.r(3), want);
    }

    #[test]
    fn reconstruction_matches_dp() {
        let w = walk(r(1, 2), 2);
        assert!(reconstruct_subgame(&w, 12).unwrap().agrees_exactly(&duration_pmf(&w, 12).unwrap()));
        let w = WalkParams::new(0.35f64, 4).unwrap();
        let tv = reconstruct_subgame(&w, 40).unwrap().tv_distance(&duration_pmf(&w, 40).unwrap());
        assert!(tv <= 1e-10, "{tv}");
        let d = reconstruct_subgame(&walk(r(1, 1), 3), 10).unwrap();
        assert_eq!(d.pmf(3), r(1, 1));
    }

    #[test]
    fn even_k_examples() {
        let rep = even_k_geometric_check(&walk(r(1, 2), 2), 20).unwrap();
        assert_eq!(rep.success_prob, r(1, 2));
        assert!(rep.exact_match);
        let rep = even_k_geometric_check(&walk(r(3, 10), 4), 40).unwrap();
        let pi = r(9, 58);
        assert_eq!(rep.success_prob, pi.clone() * &pi + complement(&pi) * complement(&pi));
        assert!(rep.exact_match);
        let rep = even_k_geometric_check(&walk(r(0, 1), 4), 20).unwrap();
        assert_eq!(rep.success_prob, r(1, 1));
        assert_eq!(rep.reconstructed.pmf(4), r(1, 1));
        assert!(even_k_geometric_check(&walk(r(1, 2), 3), 20).is_err());
    }

    #[test]
    fn pi_monotone() {
        let rep = pi_monotonicity_check(1, &[r(0, 1), r(1, 4), r(1, 2)]).unwrap();
        assert_eq!(rep.values, vec![r(0, 1), r(1, 4), r(1, 2)]);
        assert!(rep.strictly_increasing && rep.endpoints_ok);
        let grid: Vec<f64> = (0..50).map(|i| 0.5 * i as f64 / 49.0).collect();
        let rep = pi_monotonicity_check(2, &grid).unwrap();
        assert!(rep.strictly_increasing && rep.endpoints_ok);
        assert!(pi_monotonicity_check(2, &[r(3, 4)]).is_err());
    }
}
