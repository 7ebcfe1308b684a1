//! Builds the two-window weights Π at a few steps and reports their moments.

use mfmalliavin::config::RunConfig;
use mfmalliavin::paths::{simulate_ensemble, TimeGrid};
use mfmalliavin::weights::{kernel_j, WeightEngine};

fn main() -> mfmalliavin::Result<()> {
    let cfg = RunConfig::shipped("example1")?;
    let model = cfg.model();
    let asset = &model.assets[0];
    println!(
        "kernel J at x=1, m=1: z=0.2 -> {:.5}",
        kernel_j(asset, 0.5, 1.0, 0.2, 1.0)?
    );

    let bundle = simulate_ensemble(&model, TimeGrid::new(64, 1.0)?, 10_000, 11)?;
    let engine = WeightEngine::build(&bundle, &model.assets)?;
    let a = asset.levy.mass_a()?;
    println!("{:>4} {:>12} {:>12} {:>12}", "k", "mean Pi", "se", "mean Pi1");
    for k in [8, 16, 32, 48, 63] {
        let w = engine.window(&bundle, 0, k)?;
        let n = w.pi.len() as f64;
        let mean = w.pi.iter().sum::<f64>() / n;
        let se = (w.pi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let pi1 = w.pi1(a).iter().sum::<f64>() / n;
        println!("{k:>4} {mean:>12.4e} {se:>12.4e} {pi1:>12.4e}");
    }
    Ok(())
}
