//! Independent reference computations shared by the integration tests and
//! the acceptance runner. None of them call the DP they are used to check.

#![allow(dead_code)]

use num_traits::{One, Zero};
use ruin_core::linalg::solve_tridiagonal;
use ruin_core::Rational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

fn pow(x: &Rational, e: usize) -> Rational {
    num_traits::pow(x.clone(), e)
}

/// `P(T = n)` for `n = 0..=n_max` by listing every `+-1` path of length `n`
/// and keeping those whose first visit to `+-k` happens at step `n`.
pub fn enumerate_pmf(p: &Rational, k: i64, n_max: usize) -> Vec<Rational> {
    let q = Rational::one() - p;
    let mut out = vec![Rational::zero(); n_max + 1];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        let mut ups_hist = vec![0u64; n + 1];
        for mask in 0u64..(1u64 << n) {
            let mut pos = 0i64;
            let mut first_exit = None;
            for step in 0..n {
                pos += if mask >> step & 1 == 1 { 1 } else { -1 };
                if pos.abs() == k {
                    first_exit = Some(step + 1);
                    break;
                }
            }
            if first_exit == Some(n) {
                ups_hist[mask.count_ones() as usize] += 1;
            }
        }
        for (ups, &count) in ups_hist.iter().enumerate() {
            if count > 0 {
                *slot += Rational::from_integer(count.into()) * pow(p, ups) * pow(&q, n - ups);
            }
        }
    }
    out
}

/// `h(x) = P_x(reach b before a)` for `x = a..=b` by solving the harmonic
/// equations directly.
pub fn hit_upper_first(p: &Rational, a: i64, b: i64) -> Vec<Rational> {
    let q = Rational::one() - p;
    let width = (b - a - 1) as usize;
    let mut h = vec![Rational::zero(); (b - a + 1) as usize];
    *h.last_mut().unwrap() = Rational::one();
    if width == 0 {
        return h;
    }
    let sub = vec![-q.clone(); width];
    let diag = vec![Rational::one(); width];
    let sup = vec![-p.clone(); width];
    let mut rhs = vec![Rational::zero(); width];
    rhs[width - 1] = p.clone();
    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
    h[1..=width].clone_from_slice(&inner);
    h
}

/// Up-step probability at signed level `i` (`0 < |i| < k`) of the walk
/// conditioned to hit 0 before `+-k`, via `p * g(i+1) / g(i)` with `g` the
/// probability of that event.
pub fn conditioned_up_by_h_transform(p: &Rational, k: i64, i: i64) -> Rational {
    let g = |x: i64| -> Rational {
        if x == 0 {
            return Rational::one();
        }
        if x.abs() >= k {
            return Rational::zero();
        }
        if x > 0 {
            // Hit 0 before k from x: 1 - P_x(k before 0).
            Rational::one() - hit_upper_first(p, 0, k)[x as usize].clone()
        } else {
            // Hit 0 before -k from x: P_x(0 before -k).
            hit_upper_first(p, -k, 0)[(x + k) as usize].clone()
        }
    };
    p * g(i + 1) / g(i)
}

/// Game-by-game hazard of the subgame decomposition, computed by pushing
/// the signed position through successive symmetric games whose exit sides
/// come from the harmonic equations. Returns `r(1..=n_max)`.
pub fn nested_dp_hazards(p: &Rational, k: i64, n_max: usize) -> Vec<Rational> {
    // Mass on signed positions strictly inside (-k, k).
    let mut mass: Vec<(i64, Rational)> = vec![(0, Rational::one())];
    let mut hazards = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let alive: Rational = mass.iter().map(|(_, m)| m.clone()).sum();
        let mut ended = Rational::zero();
        let mut next: Vec<(i64, Rational)> = Vec::new();
        for (x, m) in &mass {
            let size = if *x == 0 { 1 } else { k - x.abs() };
            let up = hit_upper_first(p, -size, size)[size as usize].clone();
            let down = Rational::one() - &up;
            for (target, weight) in [(x + size, up), (x - size, down)] {
                let w = m.clone() * weight;
                if target.abs() >= k {
                    ended += w;
                } else if let Some(slot) = next.iter_mut().find(|(y, _)| *y == target) {
                    slot.1 += w;
                } else {
                    next.push((target, w));
                }
            }
        }
        hazards.push(ended / alive);
        mass = next;
    }
    hazards
}
