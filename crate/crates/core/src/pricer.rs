//! Backward dynamic programming for Bermudan-at-every-knot American options.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_all_sorted, estimate_product_all, EstimatorInput, EstimatorOutput, ProductInput, DEFAULT_DEN_TOL,
};
use crate::localization::{solve_lambda_multi_with, FixedPointScheme, Localizer, LocalizerKind, LocalizerPolicy};
use crate::model::{MarketSpec, ModelSpec};
use crate::paths::{simulate_ensemble, PathBundle, TimeGrid};
use crate::payoff::PayoffSpec;
use crate::weights::WeightEngine;

/// Largest tolerated share of fallback estimates at any one step.
pub const MAX_FALLBACK_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    pub model: ModelSpec,
    pub payoff: PayoffSpec,
    pub market: MarketSpec,
    /// Euler steps `N`; exercise is allowed at every knot.
    pub steps: usize,
    /// Paths `M`.
    pub paths: usize,
    pub seed: u64,
    pub localizer: LocalizerPolicy,
    pub den_tol: f64,
    /// Offset `c` of `ℋ`.
    pub heaviside_offset: f64,
    /// Keep `P̄_{t_k}` for every step in the result.
    pub keep_snapshots: bool,
    /// Project each continuation estimate onto `[min F, max F]`.
    pub range_clamp: bool,
}

impl PricingConfig {
    pub fn new(model: ModelSpec, payoff: PayoffSpec, market: MarketSpec, steps: usize, paths: usize) -> Self {
        Self {
            model,
            payoff,
            market,
            steps,
            paths,
            seed: 0,
            localizer: LocalizerPolicy::default(),
            den_tol: DEFAULT_DEN_TOL,
            heaviside_offset: 0.0,
            keep_snapshots: false,
            range_clamp: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.market.validate()?;
        self.localizer.validate()?;
        self.payoff.validate(self.model.dimension())?;
        if self.steps < 1 {
            return Err(Error::InvalidInput("at least one time step is required".into()));
        }
        if self.paths < 2 {
            return Err(Error::InvalidInput(format!(
                "at least two paths are required, got {}",
                self.paths
            )));
        }
        if !(self.den_tol >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "den_tol must be nonnegative, got {}",
                self.den_tol
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.steps, self.market.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub localizer: LocalizerKind,
    /// `λ` used per asset; empty when unlocalized.
    pub lambdas: Vec<f64>,
    /// Residual of the coupled `λ*` system (two assets only).
    pub lambda_residual: Option<f64>,
    pub fallbacks: usize,
    /// Estimates moved onto `[min F, max F]`.
    pub clamped: usize,
    pub exercised: usize,
    pub compensator_magnitude: f64,
    pub jump_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub price: f64,
    pub intrinsic: f64,
    /// `e^{−rT}·mean Φ(X_T)` on the same paths.
    pub european: f64,
    pub european_std_error: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub diagnostics: Vec<StepDiagnostics>,
    /// `P̄_{t_k}^m` for `k = 1..=N`, when requested.
    pub snapshots: Option<Vec<Vec<f64>>>,
    pub wall_time_secs: f64,
}

impl PricingResult {
    pub fn total_fallbacks(&self) -> usize {
        self.diagnostics.iter().map(|d| d.fallbacks).sum()
    }

    /// Copy with the wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn payoffs_at(cfg: &PricingConfig, bundle: &PathBundle, k: usize) -> Result<Vec<f64>> {
    (0..bundle.path_count())
        .map(|m| cfg.payoff.eval(&bundle.state_vector(k, m)))
        .collect()
}

/// Simulates and prices.
pub fn price_american(cfg: &PricingConfig) -> Result<PricingResult> {
    cfg.validate()?;
    let start = Instant::now();
    let bundle = simulate_ensemble(&cfg.model, cfg.grid()?, cfg.paths, cfg.seed)?;
    let mut result = price_on_bundle(cfg, &bundle)?;
    result.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Runs the backward recursion on an already simulated bundle.
pub fn price_on_bundle(cfg: &PricingConfig, bundle: &PathBundle) -> Result<PricingResult> {
    cfg.validate()?;
    let start = Instant::now();
    let n_steps = bundle.grid.steps;
    let disc = (-cfg.market.rate * bundle.grid.dt()).exp();
    let engine = if n_steps > 1 {
        Some(WeightEngine::build(bundle, &cfg.model.assets)?)
    } else {
        None
    };

    let terminal = payoffs_at(cfg, bundle, n_steps)?;
    let (eu_mean, eu_se) = mean_and_se(&terminal);
    let eu_disc = (-cfg.market.rate * bundle.grid.horizon).exp();
    let mut value = terminal;
    let mut snapshots = cfg.keep_snapshots.then(|| vec![value.clone()]);
    let mut diagnostics = Vec::with_capacity(n_steps.saturating_sub(1));

    for k in (1..n_steps).rev() {
        let engine = engine.as_ref().expect("weights built for N > 1");
        let (out, diag) = continuation(cfg, bundle, engine, k, &value)?;
        let intrinsic = payoffs_at(cfg, bundle, k)?;
        let (lo, hi) = value
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mut exercised = 0;
        let mut clamped = 0;
        let next: Vec<f64> = intrinsic
            .iter()
            .zip(&out.estimates)
            .map(|(&phi, e)| match e.value {
                Some(v) => {
                    let v = if cfg.range_clamp && !(lo..=hi).contains(&v) {
                        clamped += 1;
                        v.clamp(lo, hi)
                    } else {
                        v
                    };
                    let cont = disc * v;
                    if phi >= cont {
                        exercised += 1;
                        phi
                    } else {
                        cont
                    }
                }
                None => phi,
            })
            .collect();
        let fallbacks = out.fallback_count();
        let fraction = fallbacks as f64 / bundle.path_count() as f64;
        if fraction > MAX_FALLBACK_FRACTION {
            return Err(Error::EstimatorBreakdown { step: k, fraction });
        }
        debug_assert!(next.iter().zip(&intrinsic).all(|(v, p)| v >= p));
        diagnostics.push(StepDiagnostics {
            fallbacks,
            clamped,
            exercised,
            ..diag
        });
        value = next;
        if let Some(s) = snapshots.as_mut() {
            s.push(value.clone());
        }
    }
    if let Some(s) = snapshots.as_mut() {
        s.reverse();
    }

    let intrinsic = cfg.payoff.eval(&cfg.model.initial_state())?;
    let cont = disc * value.iter().sum::<f64>() / value.len() as f64;
    Ok(PricingResult {
        price: intrinsic.max(cont),
        intrinsic,
        european: eu_disc * eu_mean,
        european_std_error: eu_disc * eu_se,
        steps: n_steps,
        paths: bundle.path_count(),
        seed: bundle.seed,
        diagnostics,
        snapshots,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Continuation estimates `E[P̄_{t_{k+1}} | X_{t_k} = X_{t_k}^m]` for every path.
pub fn continuation(
    cfg: &PricingConfig,
    bundle: &PathBundle,
    engine: &WeightEngine,
    k: usize,
    next_value: &[f64],
) -> Result<(EstimatorOutput, StepDiagnostics)> {
    let d = bundle.dimension();
    let sets = (0..d)
        .map(|i| engine.window(bundle, i, k))
        .collect::<Result<Vec<_>>>()?;
    let f_sq: Vec<f64> = next_value.iter().map(|v| v * v).collect();
    let mut diag = StepDiagnostics {
        step: k,
        time: bundle.grid.time(k),
        localizer: LocalizerKind::None,
        lambdas: Vec::new(),
        lambda_residual: None,
        fallbacks: 0,
        clamped: 0,
        exercised: 0,
        compensator_magnitude: sets.iter().map(|s| s.compensator_magnitude).sum(),
        jump_magnitude: sets.iter().map(|s| s.jump_magnitude).sum(),
    };

    let out = if d == 1 {
        let loc = cfg.localizer.resolve(&f_sq, &sets[0].pi);
        diag.localizer = loc.kind();
        diag.lambdas = loc.lambda().into_iter().collect();
        let mut input = EstimatorInput::new(bundle.assets[0].states_at(k), next_value, &sets[0].pi, loc);
        input.offset = cfg.heaviside_offset;
        estimate_all_sorted(&input, cfg.den_tol)?
    } else {
        let pis: Vec<Vec<f64>> = sets.into_iter().map(|s| s.pi).collect();
        let locs = product_localizers(&cfg.localizer, &f_sq, &pis, &mut diag);
        let g: Vec<Vec<f64>> = (0..d).map(|i| bundle.assets[i].states_at(k).to_vec()).collect();
        let input = ProductInput {
            g: &g,
            f: next_value,
            pi: &pis,
            localizers: &locs,
            offset: cfg.heaviside_offset,
        };
        estimate_product_all(&input, cfg.den_tol)?
    };
    Ok((out, diag))
}

fn product_localizers(
    policy: &LocalizerPolicy,
    f_sq: &[f64],
    pis: &[Vec<f64>],
    diag: &mut StepDiagnostics,
) -> Vec<Localizer> {
    let d = pis.len();
    let none = vec![Localizer::None; d];
    if policy.kind == LocalizerKind::None {
        return none;
    }
    let lambdas = match policy.fixed_lambda {
        Some(l) => vec![l; d],
        None => match solve_lambda_multi_with(
            f_sq,
            pis,
            FixedPointScheme::Jacobi,
            policy.lambda_min,
            policy.lambda_max,
        ) {
            Ok(sol) => {
                diag.lambda_residual = Some(sol.residual);
                sol.lambdas
            }
            Err(_) => return none,
        },
    };
    diag.localizer = policy.kind;
    diag.lambdas = lambdas.clone();
    lambdas.into_iter().map(|l| policy.kind.with_lambda(l)).collect()
}

/// European counterpart: `e^{−rT}·mean Φ(X_T)` with its standard error.
pub fn price_european(cfg: &PricingConfig) -> Result<PricingResult> {
    cfg.validate()?;
    let start = Instant::now();
    let bundle = simulate_ensemble(&cfg.model, cfg.grid()?, cfg.paths, cfg.seed)?;
    let terminal = payoffs_at(cfg, &bundle, bundle.grid.steps)?;
    let (mean, se) = mean_and_se(&terminal);
    let disc = (-cfg.market.rate * cfg.market.horizon).exp();
    Ok(PricingResult {
        price: disc * mean,
        intrinsic: cfg.payoff.eval(&cfg.model.initial_state())?,
        european: disc * mean,
        european_std_error: disc * se,
        steps: cfg.steps,
        paths: cfg.paths,
        seed: cfg.seed,
        diagnostics: Vec::new(),
        snapshots: None,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasureSpec;
    use crate::model::{AssetModel, CoefficientSpec, JumpCoefficientSpec, MeanFunctional};
    use crate::rng::with_threads;

    fn kou_asset(rate: f64) -> AssetModel {
        AssetModel {
            x0: 10.0,
            drift: CoefficientSpec::affine(0.0, 0.2, 0.0),
            diffusion: CoefficientSpec::affine(0.5, 0.0, 0.0),
            jump: JumpCoefficientSpec::PureAmplitude,
            levy: LevyMeasureSpec::Kou {
                rate,
                p: 0.6,
                eta1: 10.0,
                eta2: 5.0,
            },
            mean_functional: MeanFunctional::Identity,
        }
    }

    fn cfg(steps: usize, paths: usize, strike: f64) -> PricingConfig {
        let mut c = PricingConfig::new(
            ModelSpec::single(kou_asset(5.0)),
            PayoffSpec::Put { strike },
            MarketSpec {
                rate: 0.05,
                horizon: 1.0,
            },
            steps,
            paths,
        );
        c.seed = 17;
        c
    }

    #[test]
    fn single_step_is_the_recursion_base() {
        let c = cfg(1, 500, 12.0);
        let r = price_american(&c).unwrap();
        let bundle = simulate_ensemble(&c.model, c.grid().unwrap(), 500, 17).unwrap();
        let mean = bundle.assets[0]
            .states_at(1)
            .iter()
            .map(|x| (12.0 - x).max(0.0))
            .sum::<f64>()
            / 500.0;
        let expected = 2.0f64.max((-0.05f64).exp() * mean);
        assert_eq!(r.price, expected);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn frozen_state_prices_at_intrinsic() {
        let mut c = cfg(8, 50, 12.0);
        c.model.assets[0] = AssetModel {
            drift: CoefficientSpec::zero(),
            diffusion: CoefficientSpec::zero(),
            levy: c.model.assets[0].levy.with_rate(0.0),
            ..c.model.assets[0].clone()
        };
        let r = price_american(&c).unwrap();
        assert_eq!(r.price, 2.0);
        assert_eq!(price_european(&c).unwrap().price, 2.0 * (-0.05f64).exp());
        c.market.rate = 0.0;
        assert_eq!(price_european(&c).unwrap().price, 2.0);
    }

    #[test]
    fn american_dominates_european_and_intrinsic() {
        let mut c = cfg(16, 400, 12.0);
        c.keep_snapshots = true;
        let r = price_american(&c).unwrap();
        assert!(r.price >= r.european);
        assert!(r.price >= r.intrinsic - 1e-12);
        let bundle = simulate_ensemble(&c.model, c.grid().unwrap(), 400, 17).unwrap();
        let snaps = r.snapshots.as_ref().unwrap();
        assert_eq!(snaps.len(), 16);
        for (j, snap) in snaps.iter().enumerate() {
            let phi = payoffs_at(&c, &bundle, j + 1).unwrap();
            assert!(snap.iter().zip(&phi).all(|(v, p)| v >= p));
        }
        let eu = price_european(&c).unwrap();
        assert_eq!(eu.price, r.european);
    }

    #[test]
    fn vanishing_strike_gives_zero() {
        let r = price_american(&cfg(16, 300, 1e-8)).unwrap();
        assert_eq!(r.price, 0.0);
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let c = cfg(16, 300, 12.0);
        let runs: Vec<PricingResult> = [1, 3, 8]
            .iter()
            .map(|&t| with_threads(t, || price_american(&c).unwrap().without_timing()))
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }

    #[test]
    fn two_asset_product_weights_run() {
        let mut a2 = kou_asset(3.0);
        a2.x0 = 8.0;
        let mut c = cfg(8, 200, 12.0);
        c.model = ModelSpec {
            assets: vec![kou_asset(3.0), a2],
        };
        c.payoff = PayoffSpec::MaxPut { strike: 12.0 };
        let r = price_american(&c).unwrap();
        assert!(r.price >= 2.0);
        assert!(r.diagnostics.iter().all(|d| d.lambdas.len() == 2));
    }
}
