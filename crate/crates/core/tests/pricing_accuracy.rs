mod common;

use common::*;
use mfmalliavin::fd::{solve_american_pide, FdGrid};
use mfmalliavin::levy::LevyMeasureSpec;
use mfmalliavin::localization::{LocalizerKind, LocalizerPolicy};
use mfmalliavin::model::{AssetModel, CoefficientSpec, JumpCoefficientSpec, MarketSpec, MeanFunctional, ModelSpec};
use mfmalliavin::payoff::PayoffSpec;
use mfmalliavin::pricer::{price_american, PricingConfig};

fn at_the_money() -> (AssetModel, PayoffSpec, MarketSpec) {
    let asset = AssetModel {
        x0: 5.0,
        drift: CoefficientSpec::affine(-0.2, 0.2, 0.0),
        diffusion: CoefficientSpec::affine(0.3, 0.0, 0.0),
        jump: JumpCoefficientSpec::PureAmplitude,
        levy: LevyMeasureSpec::Kou {
            rate: 2.0,
            p: 0.6,
            eta1: 10.0,
            eta2: 5.0,
        },
        mean_functional: MeanFunctional::Identity,
    };
    (
        asset,
        PayoffSpec::Put { strike: 5.0 },
        MarketSpec {
            rate: 0.03,
            horizon: 1.0,
        },
    )
}

#[test]
fn at_the_money_put_is_close_to_the_pide_price() {
    let (asset, payoff, market) = at_the_money();
    let fd = solve_american_pide(
        &asset,
        &payoff,
        &market,
        &FdGrid {
            nodes: 800,
            time_steps: 1600,
            x_max: None,
        },
    )
    .unwrap()
    .price;
    for kind in [LocalizerKind::Laplace, LocalizerKind::OneSided] {
        let mut cfg = PricingConfig::new(ModelSpec::single(asset.clone()), payoff.clone(), market, 8, 16_000);
        cfg.localizer = LocalizerPolicy::of_kind(kind);
        let r = price_american(&cfg).unwrap();
        let rel = (r.price - fd).abs() / fd;
        assert!(rel < 0.05, "{kind:?}: {} vs FD {fd} ({rel:.3})", r.price);
        assert!(r.price >= r.european);
    }
}

#[test]
fn example2_prices_settle_as_the_grid_refines() {
    let cfg = shipped("example2");
    let price = |n: usize| price_american(&cfg.pricing_with(n, 2000, 1)).unwrap().price;
    let reference = price(512);
    let gaps: Vec<f64> = [64, 128, 256].iter().map(|&n| (price(n) - reference).abs()).collect();
    let inversions = gaps.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "gaps {gaps:?}");
}
