//! Estimates E[X_{t2} | X_{t1} = a] with the Malliavin ratio estimator and
//! compares it with a kernel regression on the same sample.

use mfmalliavin::config::RunConfig;
use mfmalliavin::estimator::{estimate_all_sorted, estimate_naive, EstimatorInput};
use mfmalliavin::localization::{estimate_lambda, LocalizerKind};
use mfmalliavin::paths::{simulate_ensemble, TimeGrid};
use mfmalliavin::weights::WeightEngine;

fn main() -> mfmalliavin::Result<()> {
    let cfg = RunConfig::shipped("example2")?;
    let model = cfg.model();
    let bundle = simulate_ensemble(&model, TimeGrid::new(2, 1.0)?, 20_000, 9)?;
    let engine = WeightEngine::build(&bundle, &model.assets)?;
    let pi = engine.window(&bundle, 0, 1)?.pi;
    let g = bundle.assets[0].states_at(1).to_vec();
    let f = bundle.assets[0].states_at(2).to_vec();

    let f_sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    let lambda = estimate_lambda(&f_sq, &pi)?;
    let input = EstimatorInput::new(&g, &f, &pi, LocalizerKind::OneSided.with_lambda(lambda));
    let all = estimate_all_sorted(&input, 1e-10)?;
    println!("lambda {lambda:.4}, fallbacks {}", all.fallback_count());

    let mut sorted = g.clone();
    sorted.sort_by(f64::total_cmp);
    let h = 0.1 * (sorted[sorted.len() * 3 / 4] - sorted[sorted.len() / 4]);
    println!("{:>8} {:>10} {:>10}", "alpha", "malliavin", "kernel");
    for q in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let alpha = sorted[(q * sorted.len() as f64) as usize];
        let est = estimate_naive(&input, alpha, 1e-10)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (x, y) in g.iter().zip(&f) {
            let w = (-0.5 * ((x - alpha) / h).powi(2)).exp();
            num += w * y;
            den += w;
        }
        println!(
            "{alpha:>8.3} {:>10.3} {:>10.3}",
            est.value.unwrap_or(f64::NAN),
            num / den
        );
    }
    Ok(())
}
