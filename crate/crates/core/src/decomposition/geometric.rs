//! Return-to-origin decomposition `T = Z + sum_{i=1}^{N-1} Y_i`.
//!
//! `N - 1` counts returns to 0 before `+-k` and is geometric with success
//! probability `P(T_0 > T)`. Each `Y_i` is a return time conditioned on
//! returning, `Z` is the exit time conditioned on not returning, and all of
//! them are independent.

use serde::Serialize;

use super::{birth_death_absorption, Absorption};
use crate::dist::DurationDist;
use crate::error::{Error, Result};
use crate::linalg::upper_exit_probabilities;
use crate::markov_exact::WalkParams;
use crate::scalar::{complement, repr, Scalar};

/// Up-step probabilities `u_i(p)`, `i = 1..k-1`, of the walk conditioned to
/// return to 0 before hitting `+-k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct ConditionedChain<S: Scalar> {
    k: usize,
    #[serde(serialize_with = "repr::one")]
    p: S,
    #[serde(serialize_with = "repr::many")]
    u: Vec<S>,
}

impl<S: Scalar> ConditionedChain<S> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> &S {
        &self.p
    }

    /// Empty for `k = 1`: the walk cannot come back to 0 before `+-1`.
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `u_i(p)` for `1 <= level <= k - 1`.
    pub fn u(&self, level: usize) -> &S {
        &self.u[level - 1]
    }

    pub fn values(&self) -> &[S] {
        &self.u
    }

    /// Up-step probability at a signed level; below 0 the conditioned walk
    /// steps up (towards 0) with probability `1 - u_{|i|}`.
    pub fn u_signed(&self, level: i64) -> S {
        let idx = level.unsigned_abs() as usize;
        if level > 0 {
            self.u(idx).clone()
        } else {
            complement(self.u(idx))
        }
    }

    /// `u_i - (p(1-p) + u_{i+1} u_i)` for `i = 1..k-2`.
    pub fn recursion_residuals(&self) -> Vec<S> {
        let pq = self.p.clone() * complement(&self.p);
        (1..self.k.saturating_sub(1))
            .map(|i| {
                let rhs = pq.clone() + self.u(i + 1).clone() * self.u(i);
                self.u(i).clone() - rhs
            })
            .collect()
    }
}

/// Backward recursion `u_{k-1} = 0`, `u_i = p(1-p) / (1 - u_{i+1})`.
pub fn conditioned_chain<S: Scalar>(params: &WalkParams<S>) -> ConditionedChain<S> {
    let k = params.k();
    let pq = params.p().clone() * params.q();
    let mut u = vec![S::zero(); k.saturating_sub(1)];
    for i in (1..k.saturating_sub(1)).rev() {
        u[i - 1] = pq.clone() / complement(&u[i]);
    }
    ConditionedChain {
        k,
        p: params.p().clone(),
        u,
    }
}

/// `P_1(hit 0 before k)` for a walk stepping up with probability `up`.
fn return_from_one<S: Scalar>(up: &S, k: usize) -> Result<S> {
    let h = upper_exit_probabilities(up, k)?;
    Ok(complement(&h[1]))
}

/// `P(T_0 < T)`: probability of revisiting 0 before hitting `+-k`.
pub fn return_prob<S: Scalar>(params: &WalkParams<S>) -> Result<S> {
    if params.k() == 1 {
        return Ok(S::zero());
    }
    let p = params.p().clone();
    let q = params.q();
    let above = return_from_one(&p, params.k())?;
    let below = return_from_one(&q, params.k())?;
    Ok(p * above + q * below)
}

/// Law of the time to reach 0 from `level` under the conditioned kernel.
/// Because `u_i(p) = u_i(1-p)`, the law from `-level` is the same.
pub fn return_time_from_level<S: Scalar>(
    chain: &ConditionedChain<S>,
    level: usize,
    horizon: u64,
) -> Result<DurationDist<S>> {
    if chain.is_empty() || level == 0 || level >= chain.k {
        return Err(Error::invalid(format!(
            "start level {level} must lie in 1..{} (k = {})",
            chain.k, chain.k
        )));
    }
    let k = chain.k;
    let mut up = vec![S::zero(); k + 1];
    let mut down = vec![S::zero(); k + 1];
    for i in 1..k {
        up[i] = chain.u(i).clone();
        down[i] = complement(chain.u(i));
    }
    let Absorption {
        bottom, remaining, ..
    } = birth_death_absorption(&up, &down, level, horizon);
    Ok(DurationDist::from_dense_unchecked(k as u64, level as u64, bottom, remaining))
}

/// Law of the time from level 1 to `k` for the walk (stepping up with
/// probability `up`) conditioned to hit `k` before 0, via the h-transform
/// with `h(i) = P_i(hit k before 0)`.
fn exit_time_avoiding_origin<S: Scalar>(up: &S, k: usize, horizon: u64) -> Result<DurationDist<S>> {
    let h = upper_exit_probabilities(up, k)?;
    let down_p = complement(up);
    let mut rise = vec![S::zero(); k + 1];
    let mut fall = vec![S::zero(); k + 1];
    for i in 1..k {
        if h[i].is_zero() {
            return Err(Error::invalid("conditioning event has probability zero"));
        }
        rise[i] = up.clone() * &h[i + 1] / h[i].clone();
        fall[i] = down_p.clone() * &h[i - 1] / h[i].clone();
    }
    let Absorption { top, remaining, .. } = birth_death_absorption(&rise, &fall, 1, horizon);
    Ok(DurationDist::from_dense_unchecked(k as u64, k as u64 - 1, top, remaining))
}

/// Laws of `Y = (T_0 | T_0 < T)` and `Z = (T | T_0 > T)` up to `horizon`.
///
/// `Y` is one step to `+-1` followed by the conditioned return from level 1.
/// `Z` is one step to `+-1` (up with probability proportional to
/// `p P_1(k before 0)`, down proportional to `q P_{-1}(-k before 0)`)
/// followed by the h-transformed walk that avoids 0.
pub fn conditioned_component_dists<S: Scalar>(
    chain: &ConditionedChain<S>,
    horizon: u64,
) -> Result<(DurationDist<S>, DurationDist<S>)> {
    let k = chain.k;
    if horizon < k as u64 {
        return Err(Error::invalid(format!("horizon {horizon} is below k = {k}")));
    }
    if k == 1 {
        // Nothing to return to; the only law is the single exit step.
        let y = DurationDist::point_mass(1, 2, horizon);
        let z = DurationDist::point_mass(1, 1, horizon);
        return Ok((y, z));
    }
    let y = return_time_from_level(chain, 1, horizon)?.shifted(1, horizon);

    let p = chain.p.clone();
    let q = complement(&p);
    let weight_up = p.clone() * upper_exit_probabilities(&p, k)?[1].clone();
    let weight_down = q.clone() * upper_exit_probabilities(&q, k)?[1].clone();
    let total = weight_up.clone() + &weight_down;
    let mut mass = vec![S::zero(); horizon as usize + 1];
    let mut truncation = S::zero();
    for (weight, up) in [(weight_up, p), (weight_down, q)] {
        if weight.is_zero() {
            continue;
        }
        let share = weight / total.clone();
        let side = exit_time_avoiding_origin(&up, k, horizon)?;
        for (n, m) in side.entries() {
            mass[n as usize] += share.clone() * m;
        }
        truncation += share * side.truncation_mass();
    }
    let z = DurationDist::from_dense_unchecked(k as u64, k as u64 - 1, mass, truncation).shifted(1, horizon);
    Ok((y, z))
}

/// Components of the return-to-origin decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricDecomposition<S> {
    pub k: usize,
    pub p: S,
    pub return_prob: S,
    pub dist_y: DurationDist<S>,
    pub dist_z: DurationDist<S>,
}

impl<S: Scalar> GeometricDecomposition<S> {
    /// Success probability of the geometric `N`: `P(T_0 > T)`.
    pub fn success_prob(&self) -> S {
        complement(&self.return_prob)
    }

    /// `E[N] = 1 / P(T_0 > T)`.
    pub fn mean_count(&self) -> S {
        S::one() / self.success_prob()
    }
}

pub fn geometric_decomposition<S: Scalar>(
    params: &WalkParams<S>,
    horizon: u64,
) -> Result<GeometricDecomposition<S>> {
    let chain = conditioned_chain(params);
    let (dist_y, dist_z) = conditioned_component_dists(&chain, horizon)?;
    Ok(GeometricDecomposition {
        k: params.k(),
        p: params.p().clone(),
        return_prob: return_prob(params)?,
        dist_y,
        dist_z,
    })
}

/// Law of `Z + Y_1 + ... + Y_{N-1}` assembled by convolution:
/// `sum_{m >= 0} (1 - r) r^m (Z * Y^{*m})`, with `r` the return probability.
pub fn reconstruct_geometric<S: Scalar>(params: &WalkParams<S>, horizon: u64) -> Result<DurationDist<S>> {
    let parts = geometric_decomposition(params, horizon)?;
    let r = parts.return_prob.clone();
    let mut weight = parts.success_prob();
    let mut term = parts.dist_z.clone();
    let mut mass = vec![S::zero(); horizon as usize + 1];
    loop {
        for (n, m) in term.entries() {
            mass[n as usize] += weight.clone() * m;
        }
        weight *= &r;
        if weight.is_zero() {
            break;
        }
        term = term.convolve(&parts.dist_y, horizon);
        if term.support_min() > horizon {
            break;
        }
    }
    let mut truncation = S::one();
    for m in &mass {
        truncation -= m;
    }
    let k = params.k() as u64;
    Ok(DurationDist::from_dense_unchecked(k, k, mass, truncation))
}
