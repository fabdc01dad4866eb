//! Two structural decompositions of the duration, each rebuilt into a full
//! law and compared with the direct dynamic program.
//!
//! * [`geometric`]: `T = Z + Y_1 + ... + Y_{N-1}` with a geometric number of
//!   returns to the origin, built on the conditioned chain `u_i(p)`.
//! * [`subgame`]: `T` as a random sum of durations of smaller symmetric games
//!   with a deterministic size schedule and explicit hazard rates.

pub mod geometric;
pub mod subgame;

pub use geometric::{
    conditioned_chain, conditioned_component_dists, geometric_decomposition, reconstruct_geometric,
    return_prob, return_time_from_level, ConditionedChain, GeometricDecomposition,
};
pub use subgame::{
    even_k_geometric_check, hazard_rates, pi_monotonicity_check, reconstruct_subgame, subgame_schedule,
    EvenKReport, HazardRates, PiMonotonicityReport, SubgameSchedule,
};

use crate::scalar::Scalar;

/// Per-step absorption of a birth-death chain on `{0, ..., top}` with
/// absorbing ends, started at `start`.
pub(crate) struct Absorption<S> {
    /// Mass absorbed at 0 at each step `0..=horizon`.
    pub bottom: Vec<S>,
    /// Mass absorbed at `top` at each step `0..=horizon`.
    pub top: Vec<S>,
    pub remaining: S,
}

/// `up[i]` / `down[i]` are the move probabilities out of interior level `i`
/// (index 0 and `top` are ignored).
pub(crate) fn birth_death_absorption<S: Scalar>(
    up: &[S],
    down: &[S],
    start: usize,
    horizon: u64,
) -> Absorption<S> {
    let top = up.len() - 1;
    debug_assert!(start > 0 && start < top);
    let mut cur = vec![S::zero(); top + 1];
    let mut next = vec![S::zero(); top + 1];
    cur[start] = S::one();
    let mut bottom = vec![S::zero(); horizon as usize + 1];
    let mut top_mass = vec![S::zero(); horizon as usize + 1];
    for n in 1..=horizon as usize {
        for slot in next.iter_mut() {
            *slot = S::zero();
        }
        for level in 1..top {
            let m = &cur[level];
            if m.is_zero() {
                continue;
            }
            let rise = up[level].clone() * m;
            let fall = down[level].clone() * m;
            if level + 1 == top {
                top_mass[n] += rise;
            } else {
                next[level + 1] += rise;
            }
            if level == 1 {
                bottom[n] += fall;
            } else {
                next[level - 1] += fall;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut remaining = S::zero();
    for m in &cur {
        remaining += m;
    }
    Absorption {
        bottom,
        top: top_mass,
        remaining,
    }
}
