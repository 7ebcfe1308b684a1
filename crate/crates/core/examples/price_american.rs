//! Prices the shipped example1 put with each localizer and prints per-step diagnostics.

use mfmalliavin::config::RunConfig;
use mfmalliavin::localization::{LocalizerKind, LocalizerPolicy};
use mfmalliavin::pricer::price_american;

fn main() -> mfmalliavin::Result<()> {
    let cfg = RunConfig::shipped("example1")?;
    for kind in [LocalizerKind::None, LocalizerKind::Laplace, LocalizerKind::OneSided] {
        let mut p = cfg.pricing_with(64, 2_000, 1);
        p.localizer = LocalizerPolicy::of_kind(kind);
        let r = price_american(&p)?;
        println!(
            "{:>9}: price {:.4}  european {:.4} ± {:.4}  fallbacks {}  {:.2}s",
            kind.name(),
            r.price,
            r.european,
            r.european_std_error,
            r.total_fallbacks(),
            r.wall_time_secs
        );
    }

    let r = price_american(&cfg.pricing_with(16, 2_000, 1))?;
    println!(
        "{:>4} {:>10} {:>8} {:>9} {:>8}",
        "k", "lambda", "exercised", "fallbacks", "clamped"
    );
    for d in &r.diagnostics {
        println!(
            "{:>4} {:>10.4?} {:>8} {:>9} {:>8}",
            d.step, d.lambdas, d.exercised, d.fallbacks, d.clamped
        );
    }
    Ok(())
}
