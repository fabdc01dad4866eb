use std::f64::consts::PI;

use ruin_core::brownian::{
    bridge_convergence, density_grid, exit_density, exit_density_eval, exit_mean, exit_tail, monotonicity_sweep,
    run_bm_exits, rw_approx_exit_dist, BrownianExit,
};
use ruin_core::simulation::RngStream;

/// `P(T > t)` from the eigenfunction expansion of the killed semigroup on
/// `[-k, k]`, tilted by the drift:
/// `e^{-mu^2 t/2} sum_{n odd} (2/k) sin(n pi/2) a_n cosh(mu k) / (mu^2 + a_n^2) e^{-a_n^2 t/2}`
/// with `a_n = n pi / (2k)`.
fn spectral_tail(mu: f64, k: f64, t: f64) -> f64 {
    let mut sum = 0.0;
    for n in (1..4000).step_by(2) {
        let a = n as f64 * PI / (2.0 * k);
        let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * 2.0 / k * a * (mu * k).cosh() / (mu * mu + a * a) * (-(a * a + mu * mu) * t / 2.0).exp();
        sum += term;
        if term.abs() < 1e-18 && n > 3 {
            break;
        }
    }
    sum
}

fn be(mu: f64, k: f64) -> BrownianExit {
    BrownianExit::new(mu, k).unwrap()
}

#[test]
fn density_even_in_drift_on_twenty_points() {
    for (mu, k) in [(0.0, 1.0), (0.5, 1.0), (2.0, 0.5), (1.3, 2.0)] {
        for i in 1..=20 {
            let t = 0.1 * i as f64 * k * k;
            assert_eq!(exit_density(&be(mu, k), t).unwrap(), exit_density(&be(-mu, k), t).unwrap());
        }
    }
}

#[test]
fn tails_match_spectral_expansion() {
    for mu in [0.0, 0.5, 1.0, 2.0] {
        for k in [0.5, 1.0, 2.0] {
            for t in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
                let quad = exit_tail(&be(mu, k), t, 1e-12).unwrap();
                let spectral = spectral_tail(mu, k, t);
                assert!((quad - spectral).abs() < 1e-9, "mu={mu} k={k} t={t}: {quad} vs {spectral}");
            }
        }
    }
}

#[test]
fn means_match_drift_formula() {
    // E[T] = k tanh(mu k) / mu, and k^2 without drift.
    let mean = exit_mean(&be(0.0, 1.0), 1e-10).unwrap();
    assert!((mean - 1.0).abs() < 1e-6, "{mean}");
    for (mu, k) in [(0.5, 1.0), (1.0, 2.0), (2.0, 0.5)] {
        let mean = exit_mean(&be(mu, k), 1e-10).unwrap();
        let want = k * (mu * k).tanh() / mu;
        assert!((mean - want).abs() < 1e-6, "mu={mu} k={k}: {mean} vs {want}");
    }
}

#[test]
fn truncation_certificate_holds_when_tolerance_doubles() {
    for (mu, k) in [(0.0, 1.0), (0.5, 1.0), (2.0, 2.0)] {
        let tight = be(mu, k).with_series_tol(1e-12).unwrap();
        let loose = be(mu, k).with_series_tol(2e-12).unwrap();
        for i in 1..=40 {
            let t = 0.05 * i as f64 * k * k;
            let a = exit_density_eval(&tight, t).unwrap();
            let b = exit_density_eval(&loose, t).unwrap();
            assert!((a.value - b.value).abs() <= b.truncation_bound(), "mu={mu} k={k} t={t}");
        }
    }
}

#[test]
fn density_grid_invariants() {
    let times: Vec<f64> = (1..=50).map(|i| 0.02 * i as f64).collect();
    for (mu, k) in [(0.0, 0.5), (1.0, 1.0), (2.0, 2.0)] {
        let grid = density_grid(&be(mu, k), &times, 1e-11).unwrap();
        assert!(grid.values.iter().all(|&v| v >= -1e-14));
        assert!(grid.est_norm <= 1.0 + 1e-8);
        assert!(grid.norm_defect <= 1e-8);
        assert!(grid.tail_beyond < 1e-10);
    }
}

#[test]
fn tail_examples_with_simulation_cross_check() {
    assert_eq!(exit_tail(&be(0.7, 1.5), 0.0, 1e-10).unwrap(), 1.0);

    let fast = exit_tail(&be(2.0, 1.0), 10.0, 1e-10).unwrap();
    assert!(fast < 1e-3);
    let sim = run_bm_exits(2.0, 1.0, 1e-3, 20_000, RngStream::new(21, 0), 0).unwrap();
    assert!(sim.tail(10.0) < 1e-3);

    let still = exit_tail(&be(0.0, 1.0), 1.0, 1e-10).unwrap();
    let drift = exit_tail(&be(0.5, 1.0), 1.0, 1e-10).unwrap();
    assert!(still >= drift);
    let rw_still = rw_approx_exit_dist(0.0, 1.0, 1e-4, 1.0).unwrap().scaled_tail(1.0).unwrap();
    let rw_drift = rw_approx_exit_dist(0.5, 1.0, 1e-4, 1.0).unwrap().scaled_tail(1.0).unwrap();
    assert!(rw_still >= rw_drift);

    let rep = monotonicity_sweep(2.0, &[0.0, 1.0], &[4.0], 1e-10).unwrap();
    assert!(rep.ordered);
    let a = run_bm_exits(0.0, 2.0, 1e-3, 20_000, RngStream::new(22, 0), 0).unwrap();
    let b = run_bm_exits(1.0, 2.0, 1e-3, 20_000, RngStream::new(22, 1), 0).unwrap();
    assert!(a.tail(4.0) > b.tail(4.0));
}

#[test]
fn drift_sweep_example() {
    let mus: Vec<f64> = (0..=8).map(|j| 0.25 * j as f64).collect();
    let rep = monotonicity_sweep(1.0, &mus, &[0.25, 0.5, 1.0, 2.0, 4.0], 1e-10).unwrap();
    assert!(rep.ordered);
    assert!(rep.min_margin >= -2e-10);
    assert_eq!(rep.margins.len(), 8 * 5);
}

#[test]
fn random_walk_approximation_examples() {
    let rw = rw_approx_exit_dist(0.0, 1.0, 1e-4, 1.0).unwrap();
    assert_eq!(rw.p, 0.5);
    assert_eq!(rw.big_k, 100);
    let mean = rw.scaled_mean().unwrap();
    assert!((mean - 1.0).abs() < 0.02, "{mean}");

    let rw = rw_approx_exit_dist(0.5, 1.0, 1e-4, 5.0).unwrap();
    let target = be(0.5, 1.0);
    let mut sup: f64 = 0.0;
    for t in [0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
        sup = sup.max((rw.scaled_tail(t).unwrap() - exit_tail(&target, t, 1e-10).unwrap()).abs());
    }
    assert!(sup <= 0.01, "{sup}");
    assert!(rw.scaled_tail(6.0).is_err());
}

#[test]
fn convergence_report_shrinks_with_step() {
    let rep = bridge_convergence(0.5, 1.0, &[1.6e-3, 4e-4, 1e-4], &[0.1, 0.5, 1.0, 2.0], 1e-10).unwrap();
    assert!(rep.decreasing);
    assert!(rep.rows.iter().all(|r| !r.rounding_warning));
}

#[test]
fn three_routes_agree() {
    let (mu, k) = (0.5, 1.0);
    let target = be(mu, k);
    let rw = rw_approx_exit_dist(mu, k, 1e-4, 5.0).unwrap();
    let sim = run_bm_exits(mu, k, 1e-3, 100_000, RngStream::new(23, 0), 0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 1..=50 {
        let t = 0.1 * i as f64;
        let quad = exit_tail(&target, t, 1e-10).unwrap();
        let dp = rw.scaled_tail(t).unwrap();
        let mc = sim.tail(t);
        worst = worst.max((quad - dp).abs()).max((quad - mc).abs()).max((dp - mc).abs());
    }
    assert!(worst <= 0.01, "{worst}");
    assert!((sim.mean() - k * (mu * k).tanh() / mu).abs() < 0.01);
}
