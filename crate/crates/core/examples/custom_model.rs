//! Builds a model in code (jumps linear in z with a constant slope, Kou marks)
//! and prices an at-the-money American put against the FD benchmark.

use mfmalliavin::fd::{solve_american_pide, FdGrid};
use mfmalliavin::levy::LevyMeasureSpec;
use mfmalliavin::localization::{LocalizerKind, LocalizerPolicy};
use mfmalliavin::model::{AssetModel, CoefficientSpec, JumpCoefficientSpec, MarketSpec, MeanFunctional, ModelSpec};
use mfmalliavin::payoff::PayoffSpec;
use mfmalliavin::pricer::{price_american, PricingConfig};

fn main() -> mfmalliavin::Result<()> {
    let asset = AssetModel {
        x0: 5.0,
        drift: CoefficientSpec::affine(-0.2, 0.2, 0.0),
        diffusion: CoefficientSpec::affine(0.3, 0.0, 0.0),
        jump: JumpCoefficientSpec::AffineInZ {
            lambda0: CoefficientSpec::constant(0.5),
            lam: 0.0,
        },
        levy: LevyMeasureSpec::Kou {
            rate: 2.0,
            p: 0.4,
            eta1: 8.0,
            eta2: 6.0,
        },
        mean_functional: MeanFunctional::Identity,
    };
    asset.validate()?;
    let payoff = PayoffSpec::Put { strike: 5.0 };
    let market = MarketSpec {
        rate: 0.03,
        horizon: 1.0,
    };

    let mut cfg = PricingConfig::new(ModelSpec::single(asset.clone()), payoff.clone(), market, 8, 16_000);
    cfg.seed = 2;
    cfg.localizer = LocalizerPolicy::of_kind(LocalizerKind::Laplace);
    let mc = price_american(&cfg)?;
    let fd = solve_american_pide(
        &asset,
        &payoff,
        &market,
        &FdGrid {
            nodes: 400,
            time_steps: 800,
            x_max: None,
        },
    )?;
    println!(
        "malliavin MC {:.4} (european {:.4}), FD {:.4}",
        mc.price, mc.european, fd.price
    );
    Ok(())
}
