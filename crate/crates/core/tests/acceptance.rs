//! Acceptance runner: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p ruin-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use ruin_core::brownian::{bridge_convergence, density_grid, monotonicity_sweep, BrownianExit};
use ruin_core::closed_form::cross_validate;
use ruin_core::decomposition::{
    conditioned_chain, even_k_geometric_check, hazard_rates, reconstruct_geometric, reconstruct_subgame, return_prob,
};
use ruin_core::markov_exact::{duration_pmf, joint_duration_winner, quantile, tail_monotonicity_sweep, win_prob};
use ruin_core::simulation::{run_coupled, ConditionedCoupling, RngStream};
use ruin_core::{Rational, WalkParams};

use common::{conditioned_up_by_h_transform, enumerate_pmf, nested_dp_hazards, rat};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exact(p: &Rational, k: usize) -> WalkParams<Rational> {
    WalkParams::new(p.clone(), k).unwrap()
}

fn enumeration_oracle() -> Outcome {
    let mut checked = 0;
    for k in 1..=3usize {
        for p in [rat(1, 10), rat(3, 10), rat(1, 2)] {
            let dp = duration_pmf(&exact(&p, k), 12).map_err(|e| e.to_string())?;
            let brute = enumerate_pmf(&p, k as i64, 12);
            for (n, want) in brute.iter().enumerate() {
                ensure(dp.pmf(n as u64) == *want, || format!("k={k} p={p} n={n}: DP {} vs {want}", dp.pmf(n as u64)))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} point probabilities identical"))
}

fn tail_sweep() -> Outcome {
    let grid: Vec<Rational> = (1..=10).map(|j| rat(j, 20)).collect();
    let mut comparisons = 0;
    for k in 2..=8usize {
        // The fair walk has the largest quantiles on this grid.
        let n_max = quantile(&exact(&rat(1, 2), k), &rat(999, 1000)).map_err(|e| e.to_string())?;
        let rep = tail_monotonicity_sweep(k, &grid, n_max).map_err(|e| e.to_string())?;
        ensure(rep.ordered(), || format!("k={k}: {:?}", rep.violations.first()))?;
        comparisons += rep.comparisons;
    }
    Ok(format!("{comparisons} exact tail comparisons, no violations"))
}

fn closed_forms() -> Outcome {
    let mut worst_karni: f64 = 0.0;
    let mut worst_feller: f64 = 0.0;
    let mut worst_ratio_spread: f64 = 0.0;
    let mut ratio = 0.0;
    for k in 1..=5usize {
        for p in [0.3, 0.5, 0.7] {
            let rep = cross_validate(&WalkParams::new(p, k).unwrap(), 60).map_err(|e| e.to_string())?;
            worst_feller = worst_feller.max(rep.max_feller_abs_diff);
            if let Some(d) = rep.max_karni_abs_diff {
                worst_karni = worst_karni.max(d);
            }
            let ratios: Vec<f64> = rep
                .entries
                .iter()
                .filter(|e| k > 1 && e.dp_value > 0.0)
                .map(|e| e.feller_printed / e.dp_value)
                .collect();
            if let Some(&first) = ratios.first() {
                ratio = first;
                let spread = ratios.iter().map(|r| (r - first).abs()).fold(0.0, f64::max);
                worst_ratio_spread = worst_ratio_spread.max(spread);
            }
        }
    }
    ensure(worst_karni <= 1e-12, || format!("binomial series off by {worst_karni:e}"))?;
    ensure(worst_feller <= 1e-12, || format!("calibrated cosine sum off by {worst_feller:e}"))?;
    ensure(worst_ratio_spread <= 1e-10, || format!("printed/true ratio varies by {worst_ratio_spread:e}"))?;
    Ok(format!(
        "max |err| binomial {worst_karni:.1e}, cosine {worst_feller:.1e}; printed/true ratio {ratio:.12} (spread {worst_ratio_spread:.1e})"
    ))
}

fn decompositions() -> Outcome {
    let horizon = 60;
    for k in 1..=5usize {
        for p in [rat(1, 10), rat(3, 10), rat(1, 2), rat(2, 3)] {
            let params = exact(&p, k);
            let dp = duration_pmf(&params, horizon).map_err(|e| e.to_string())?;
            let geo = reconstruct_geometric(&params, horizon).map_err(|e| e.to_string())?;
            ensure(geo.agrees_exactly(&dp), || format!("geometric rebuild differs at k={k} p={p}"))?;
            if k >= 2 {
                let sub = reconstruct_subgame(&params, horizon).map_err(|e| e.to_string())?;
                ensure(sub.agrees_exactly(&dp), || format!("subgame rebuild differs at k={k} p={p}"))?;
            }
        }
    }
    for k in [2usize, 4, 6] {
        for p in [rat(1, 10), rat(3, 10), rat(1, 2)] {
            let rep = even_k_geometric_check(&exact(&p, k), horizon).map_err(|e| e.to_string())?;
            ensure(rep.exact_match, || format!("even-k law differs at k={k} p={p}"))?;
        }
    }
    Ok("both rebuilds equal the DP law through n = 60; even-k check exact for k = 2, 4, 6".into())
}

fn conditioned_chain_properties() -> Outcome {
    let grid: Vec<Rational> = (0..10).map(|j| rat(j, 20)).collect();
    for k in 2..=8usize {
        let mut previous: Option<Vec<Rational>> = None;
        for p in &grid {
            let chain = conditioned_chain(&exact(p, k));
            ensure(chain.recursion_residuals().iter().all(Zero::is_zero), || {
                format!("recursion residual nonzero at k={k} p={p}")
            })?;
            let mirrored = conditioned_chain(&exact(&(Rational::one() - p), k));
            ensure(chain.values() == mirrored.values(), || format!("u(p) != u(1-p) at k={k} p={p}"))?;
            for i in 1..k as i64 {
                let from_h = conditioned_up_by_h_transform(p, k as i64, i);
                ensure(from_h == chain.u_signed(i), || format!("h-transform differs at k={k} p={p} i={i}"))?;
                let below = conditioned_up_by_h_transform(&(Rational::one() - p), k as i64, -i);
                ensure(chain.u(i as usize).clone() == Rational::one() - below, || {
                    format!("u_i(p) != 1 - u_-i(1-p) at k={k} p={p} i={i}")
                })?;
            }
            if let Some(prev) = &previous {
                // u_{k-1} = 0 for every p; the others must strictly increase.
                for i in 0..k.saturating_sub(2) {
                    ensure(chain.values()[i] > prev[i], || format!("u_{} not increasing at k={k} p={p}", i + 1))?;
                }
            }
            previous = Some(chain.values().to_vec());
        }
    }
    for p in (0..=20).map(|j| rat(j, 20)) {
        let rp = return_prob(&exact(&p, 2)).map_err(|e| e.to_string())?;
        let want = rat(2, 1) * &p * (Rational::one() - &p);
        ensure(rp == want, || format!("return probability at k=2, p={p}: {rp} vs {want}"))?;
    }
    Ok("recursion exact, p <-> 1-p symmetric, h-transform agrees, strictly increasing, k=2 return law exact".into())
}

fn winner_independence() -> Outcome {
    let mut points = 0;
    for k in 1..=5usize {
        for p in [rat(1, 10), rat(2, 5)] {
            let params = exact(&p, k);
            let joint = joint_duration_winner(&params, 40).map_err(|e| e.to_string())?;
            for (n, r) in joint.independence_residuals(&win_prob(&params)) {
                ensure(r.is_zero(), || format!("residual {r} at k={k} p={p} n={n}"))?;
                points += 1;
            }
        }
    }
    Ok(format!("product form exact at {points} support points"))
}

fn coupling() -> Outcome {
    const TRIALS: u64 = 1_000_000;
    let mut cells = Vec::new();
    for k in [3usize, 5] {
        for (p, p_prime) in [(0.1, 0.3), (0.25, 0.45), (0.4, 0.5)] {
            for start in [1, k - 1] {
                cells.push((p, p_prime, k, start));
            }
        }
    }
    let mut total = 0;
    for (idx, &(p, p_prime, k, start)) in cells.iter().enumerate() {
        let coupling = ConditionedCoupling::new(p, p_prime, k).map_err(|e| e.to_string())?;
        let stream = RngStream::new(20_240_601, idx as u64);
        let stats = run_coupled(&coupling, start, TRIALS, stream, 0).map_err(|e| e.to_string())?;
        ensure(stats.ordering_violations == 0, || {
            format!("{} violations at p={p} p'={p_prime} k={k} i={start}", stats.ordering_violations)
        })?;
        total += stats.trials;
    }
    let coupling = ConditionedCoupling::new(0.25, 0.45, 5).map_err(|e| e.to_string())?;
    let one = run_coupled(&coupling, 2, 200_000, RngStream::new(7, 7), 1).map_err(|e| e.to_string())?;
    let eight = run_coupled(&coupling, 2, 200_000, RngStream::new(7, 7), 8).map_err(|e| e.to_string())?;
    ensure(one == eight, || "1-worker and 8-worker runs differ".into())?;
    Ok(format!("{} cells, {total} coupled draws, 0 violations; 1 vs 8 workers identical", cells.len()))
}

fn hazards() -> Outcome {
    for k in 2..=5usize {
        for p in [rat(1, 10), rat(1, 4), rat(2, 5), rat(1, 2), rat(3, 4)] {
            let rates = hazard_rates(&exact(&p, k), 12).map_err(|e| e.to_string())?;
            let oracle = nested_dp_hazards(&p, k as i64, 12);
            ensure(rates.hazards == oracle, || format!("hazards differ at k={k} p={p}"))?;
        }
        let grid: Vec<Rational> = (0..=10).map(|j| rat(j, 20)).collect();
        let rows: Vec<Vec<Rational>> = grid
            .iter()
            .map(|p| hazard_rates(&exact(p, k), 12).map(|h| h.hazards))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for w in rows.windows(2) {
            for n in 0..12 {
                ensure(w[1][n] <= w[0][n], || format!("r({}) increases in p at k={k}", n + 1))?;
            }
        }
    }
    Ok("r(n) equals the nested game-level chain exactly; nonincreasing in p on [0, 1/2]".into())
}

fn brownian_normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for mu in [0.0, 0.5, 1.0, 2.0] {
        for k in [0.5, 1.0, 2.0] {
            let be = BrownianExit::new(mu, k).map_err(|e| e.to_string())?;
            let grid = density_grid(&be, &[], 1e-11).map_err(|e| e.to_string())?;
            let defect = (grid.est_norm + grid.tail_beyond - 1.0).abs();
            ensure(defect <= 1e-8, || format!("mu={mu} k={k}: integral defect {defect:e}"))?;
            worst = worst.max(defect);
        }
    }
    Ok(format!("12 (mu, k) cells, worst |int f - 1| = {worst:.1e}"))
}

fn drift_sweep() -> Outcome {
    const QUAD_TOL: f64 = 1e-10;
    let mus: Vec<f64> = (0..=8).map(|j| 0.25 * j as f64).collect();
    let rep = monotonicity_sweep(1.0, &mus, &[0.25, 0.5, 1.0, 2.0, 4.0], QUAD_TOL).map_err(|e| e.to_string())?;
    ensure(rep.ordered, || format!("min margin {:e}", rep.min_margin))?;
    Ok(format!("{} comparisons, min margin {:.3e} >= -2 quad_tol", rep.margins.len(), rep.min_margin))
}

fn weak_convergence() -> Outcome {
    let ts = [0.1, 0.25, 0.5, 1.0, 2.0, 5.0];
    let rep = bridge_convergence(0.5, 1.0, &[4e-4, 1e-4], &ts, 1e-10).map_err(|e| e.to_string())?;
    let (coarse, fine) = (rep.rows[0].sup_distance, rep.rows[1].sup_distance);
    ensure(fine <= 0.01, || format!("sup distance {fine:e} at h = 1e-4"))?;
    ensure(rep.decreasing, || format!("distance did not shrink: {coarse:e} -> {fine:e}"))?;
    Ok(format!("sup distance {coarse:.2e} (h = 4e-4) -> {fine:.2e} (h = 1e-4)"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "enumeration oracle", limit: Some(Duration::from_secs(10)), run: enumeration_oracle },
        Criterion { id: 2, name: "tail monotonicity in p", limit: Some(Duration::from_secs(60)), run: tail_sweep },
        Criterion { id: 3, name: "closed-form cross-validation", limit: None, run: closed_forms },
        Criterion { id: 4, name: "decomposition equivalence", limit: None, run: decompositions },
        Criterion { id: 5, name: "conditioned chain properties", limit: None, run: conditioned_chain_properties },
        Criterion { id: 6, name: "winner independence", limit: None, run: winner_independence },
        Criterion { id: 7, name: "monotone coupling", limit: Some(Duration::from_secs(120)), run: coupling },
        Criterion { id: 8, name: "hazard formula", limit: None, run: hazards },
        Criterion { id: 9, name: "Brownian normalization", limit: Some(Duration::from_secs(30)), run: brownian_normalization },
        Criterion { id: 10, name: "tail monotonicity in drift", limit: None, run: drift_sweep },
        Criterion { id: 11, name: "random-walk to Brownian bridge", limit: Some(Duration::from_secs(120)), run: weak_convergence },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.1?}, limit {limit:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("{tag} {:>2} {:<32} {detail} [{:.2} s]", c.id, c.name, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
