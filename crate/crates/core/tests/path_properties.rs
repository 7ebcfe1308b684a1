mod common;

use common::*;
use mfmalliavin::config::SHIPPED;
use mfmalliavin::fd::solve_moment_ode;
use mfmalliavin::model::ModelSpec;
use mfmalliavin::paths::{simulate_ensemble, TimeGrid};
use mfmalliavin::rng::with_threads;

#[test]
fn bundles_are_identical_across_thread_counts() {
    let model = shipped("example3_balanced").model();
    let grid = TimeGrid::new(32, 1.0).unwrap();
    let one = with_threads(1, || simulate_ensemble(&model, grid, 500, 3).unwrap());
    for threads in [2, 5] {
        let other = with_threads(threads, || simulate_ensemble(&model, grid, 500, 3).unwrap());
        assert!(one == other, "threads={threads}");
    }
}

#[test]
fn particle_mean_error_is_first_order_in_the_step() {
    // jump-free example1: dX = (X + m) dt + X/2 dW, m(t) = e^{2t}
    let model = ModelSpec::single(without_jumps(asset("example1")));
    let exact = 2f64.exp();
    let errors: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let b = simulate_ensemble(&model, TimeGrid::new(n, 1.0).unwrap(), 20_000, 70).unwrap();
            (b.empirical_mean(0, n) - exact).abs()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.4..=2.6).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn variations_stay_positive_on_shipped_configs() {
    for (name, _) in SHIPPED {
        let cfg = shipped(name);
        let bundle = simulate_ensemble(
            &cfg.model(),
            TimeGrid::new(cfg.simulation.steps, cfg.market.horizon).unwrap(),
            cfg.simulation.paths,
            cfg.simulation.seed,
        )
        .unwrap_or_else(|e| panic!("{name}: {e}"));
        for (i, a) in bundle.assets.iter().enumerate() {
            assert!(a.variations.iter().all(|&y| y > 0.0), "{name} asset {i}");
        }
    }
}

#[test]
fn basket_asset_means_follow_the_moment_ode() {
    let cfg = shipped("example3_balanced");
    for (i, a) in cfg.assets.iter().enumerate() {
        let steps = 256;
        let model = ModelSpec::single(a.clone());
        let bundle = simulate_ensemble(&model, TimeGrid::new(steps, 1.0).unwrap(), 10_000, 80 + i as u64).unwrap();
        let ode = solve_moment_ode(a, 1.0, 4 * steps).unwrap();
        let worst = (0..=steps)
            .map(|k| {
                let (m, se) = mean_se(bundle.assets[0].states_at(k));
                if se == 0.0 {
                    0.0
                } else {
                    (m - ode.at(bundle.grid.time(k))).abs() / se
                }
            })
            .fold(0.0, f64::max);
        assert!(worst <= 3.0, "asset {i}: max |z| {worst}");
    }
}
