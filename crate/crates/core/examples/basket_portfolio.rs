//! Two-asset basket put under the three shipped weightings.

use mfmalliavin::config::RunConfig;
use mfmalliavin::payoff::PayoffSpec;
use mfmalliavin::pricer::price_american;

fn main() -> mfmalliavin::Result<()> {
    for name in ["example3_conservative", "example3_balanced", "example3_aggressive"] {
        let cfg = RunConfig::shipped(name)?;
        let r = price_american(&cfg.pricing_with(32, 500, 1))?;
        let weights = match &cfg.payoff {
            PayoffSpec::Basket { weights, .. } => weights.clone(),
            _ => vec![],
        };
        let worst = r
            .diagnostics
            .iter()
            .filter_map(|d| d.lambda_residual)
            .fold(0.0, f64::max);
        println!(
            "{name:<22} w={weights:?}  price {:.4}  intrinsic {:.4}  european {:.4}  max lambda residual {worst:.1e}",
            r.price, r.intrinsic, r.european
        );
    }
    Ok(())
}
