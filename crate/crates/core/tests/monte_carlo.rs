use num_traits::ToPrimitive;
use ruin_core::decomposition::{conditioned_chain, return_time_from_level};
use ruin_core::markov_exact::{duration_pmf, duration_tails, expected_duration, win_prob};
use ruin_core::simulation::{
    chi_square_statistic, dkw_epsilon, empirical_dominance, run_coupled, run_walks, simulate_walk,
    ConditionedCoupling, RngStream,
};
use ruin_core::{Rational, WalkParams, Winner};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn walk(p: f64, k: usize) -> WalkParams<f64> {
    WalkParams::new(p, k).unwrap()
}

#[test]
fn sure_walk_exits_straight_up() {
    let mut rng = RngStream::new(3, 0).rng();
    for _ in 0..1000 {
        assert_eq!(simulate_walk(&walk(1.0, 3), &mut rng).unwrap(), (3, Winner::Plus));
    }
}

#[test]
fn fair_mean_within_three_standard_errors() {
    let stats = run_walks(&walk(0.5, 2), 1_000_000, RngStream::new(11, 0), 0).unwrap();
    let se = stats.mean_standard_error();
    assert!((stats.mean() - 4.0).abs() < 3.0 * se, "mean {} se {se}", stats.mean());
}

#[test]
fn win_frequency_within_three_standard_errors() {
    let stats = run_walks(&walk(0.6, 2), 1_000_000, RngStream::new(12, 0), 0).unwrap();
    let pi = 9.0 / 13.0;
    let se = (pi * (1.0 - pi) / stats.trials as f64).sqrt();
    assert!((stats.plus_frequency() - pi).abs() < 3.0 * se);
}

#[test]
fn histogram_fits_dp_law() {
    let params = walk(0.35, 4);
    let trials = 200_000;
    let stats = run_walks(&params, trials, RngStream::new(13, 0), 0).unwrap();
    let dp = duration_pmf(&params, 400).unwrap();
    let (stat, dof) = chi_square_statistic(&stats.histogram, |n| dp.pmf(n), 0..=400, trials, 5.0);
    let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
    assert!(dof > 10);
    assert!(p_value > 1e-3, "chi-square {stat} on {dof} dof, p = {p_value}");
}

#[test]
fn duration_uncorrelated_with_winner() {
    let stats = run_walks(&walk(0.3, 3), 400_000, RngStream::new(14, 0), 0).unwrap();
    let r = stats.duration_winner_correlation();
    assert!(r.abs() < 4.0 / (stats.trials as f64).sqrt(), "correlation {r}");
    let mean = expected_duration(&walk(0.3, 3), 1e-12).unwrap();
    assert!((stats.mean() - mean).abs() < 4.0 * stats.mean_standard_error());
    let pi = win_prob(&walk(0.3, 3));
    assert!((stats.plus_frequency() - pi).abs() < 4.0 * (pi * (1.0 - pi) / stats.trials as f64).sqrt());
}

#[test]
fn equal_parameters_couple_identically() {
    let coupling = ConditionedCoupling::new(0.35, 0.35, 6).unwrap();
    let stats = run_coupled(&coupling, 3, 50_000, RngStream::new(15, 0), 0).unwrap();
    assert_eq!(stats.ties, stats.trials);
    assert_eq!(stats.hist_low, stats.hist_high);
}

#[test]
fn coupled_marginals_match_conditioned_dp_and_stay_ordered() {
    let (p, p_prime, k, start) = (0.2, 0.5, 4, 1);
    let trials = 100_000;
    let coupling = ConditionedCoupling::new(p, p_prime, k).unwrap();
    let stats = run_coupled(&coupling, start, trials, RngStream::new(16, 0), 0).unwrap();
    assert_eq!(stats.ordering_violations, 0);

    let eps = dkw_epsilon(trials, 0.001);
    let exact_law = |p: Rational| {
        let chain = conditioned_chain(&WalkParams::new(p, k).unwrap());
        return_time_from_level(&chain, start, 400).unwrap()
    };
    let low = exact_law(Rational::new(1.into(), 5.into()));
    let high = exact_law(Rational::new(1.into(), 2.into()));
    let mut cdf_low = 0.0;
    let mut cdf_high = 0.0;
    for t in 0..=400u64 {
        cdf_low += low.pmf(t).to_f64().unwrap();
        cdf_high += high.pmf(t).to_f64().unwrap();
        assert!((stats.ecdf_low(t) - cdf_low).abs() <= eps, "t={t}");
        assert!((stats.ecdf_high(t) - cdf_high).abs() <= eps, "t={t}");
        assert!(stats.ecdf_low(t) + eps >= stats.ecdf_high(t) - eps);
        // The exact laws are ordered too.
        assert!(cdf_low >= cdf_high - 1e-12);
    }
}

#[test]
fn dominance_examples() {
    let rep = empirical_dominance(&walk(0.3, 10), &walk(0.5, 10), 100_000, 0.99, RngStream::new(17, 0), 0).unwrap();
    assert!(rep.holds, "violations at {:?}", rep.violations);
    // Sanity against exact tails at every evaluated point.
    let exact_low = duration_tails(&walk(0.3, 10), 2000);
    let exact_high = duration_tails(&walk(0.5, 10), 2000);
    for row in &rep.rows {
        let t = row.t as usize;
        if t <= 2000 {
            assert!((1.0 - row.ecdf_low - exact_low[t]).abs() <= rep.band);
            assert!((1.0 - row.ecdf_high - exact_high[t]).abs() <= rep.band);
        }
    }

    let same = empirical_dominance(&walk(0.5, 4), &walk(0.5, 4), 100_000, 0.99, RngStream::new(18, 0), 0).unwrap();
    assert!(same.holds);

    let rep = empirical_dominance(&walk(0.1, 3), &walk(0.5, 3), 100_000, 0.99, RngStream::new(19, 0), 0).unwrap();
    let (low, high) = rep.tails_at(9);
    assert!(high > low, "tails at 9: {low} vs {high}");
    let dp_low = duration_tails(&walk(0.1, 3), 9)[9];
    let dp_high = duration_tails(&walk(0.5, 3), 9)[9];
    assert!(dp_high > dp_low);
}

#[test]
fn identical_seed_identical_statistics() {
    let params = walk(0.45, 5);
    let a = run_walks(&params, 50_000, RngStream::new(99, 2), 1).unwrap();
    let b = run_walks(&params, 50_000, RngStream::new(99, 2), 3).unwrap();
    let c = run_walks(&params, 50_000, RngStream::new(99, 2), 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let d = run_walks(&params, 50_000, RngStream::new(100, 2), 8).unwrap();
    assert_ne!(a, d);
}
