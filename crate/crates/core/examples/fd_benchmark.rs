//! Finite-difference American and European put prices with a grid refinement.

use mfmalliavin::config::RunConfig;
use mfmalliavin::fd::{solve_american_pide, solve_european_pide, FdGrid};

fn main() -> mfmalliavin::Result<()> {
    for name in ["example1", "example2"] {
        let cfg = RunConfig::shipped(name)?;
        let asset = &cfg.assets[0];
        println!("{name}: x0 = {}, K = {}", asset.x0, cfg.payoff.strike());
        let mut grid = FdGrid {
            nodes: 250,
            time_steps: 500,
            x_max: None,
        };
        for _ in 0..3 {
            let am = solve_american_pide(asset, &cfg.payoff, &cfg.market, &grid)?;
            let eu = solve_european_pide(asset, &cfg.payoff, &cfg.market, &grid)?;
            println!(
                "  {:>5} x {:>5}  x_max {:>7.1}  american {:.5}  european {:.5}",
                grid.nodes, grid.time_steps, am.x_max, am.price, eu.price
            );
            grid = grid.refined();
        }
    }
    Ok(())
}
