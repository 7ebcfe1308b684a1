//! Simulates the mean-field particle system of the shipped example2 and compares the
//! particle mean against the moment ODE.

use mfmalliavin::config::RunConfig;
use mfmalliavin::fd::solve_moment_ode;
use mfmalliavin::paths::{simulate_ensemble, TimeGrid};

fn main() -> mfmalliavin::Result<()> {
    let cfg = RunConfig::shipped("example2")?;
    let model = cfg.model();
    let grid = TimeGrid::new(128, cfg.market.horizon)?;
    let bundle = simulate_ensemble(&model, grid, 5_000, 7)?;
    let ode = solve_moment_ode(&model.assets[0], cfg.market.horizon, 1024)?;

    println!("{:>6} {:>10} {:>10} {:>10}", "t", "particle", "ode", "E[Y]");
    for k in (0..=128).step_by(16) {
        let t = bundle.grid.time(k);
        let y = bundle.assets[0].variations_at(k);
        let ey = y.iter().sum::<f64>() / y.len() as f64;
        println!(
            "{t:>6.3} {:>10.4} {:>10.4} {ey:>10.4}",
            bundle.empirical_mean(0, k),
            ode.at(t)
        );
    }
    let jumps: usize = bundle.assets[0].jumps.iter().map(Vec::len).sum();
    println!("jumps per path: {:.3}", jumps as f64 / bundle.path_count() as f64);
    Ok(())
}
