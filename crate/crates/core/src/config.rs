//! TOML run configuration.
//!
//! A file describes one model, payoff and market plus the numerical settings
//! for simulation, localization, the finite-difference benchmark and batch
//! experiments. Optional Kou parameters and the short rate fall back to
//! documented defaults; every default taken is listed in
//! [`RunConfig::defaults_used`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::DEFAULT_DEN_TOL;
use crate::fd::FdGrid;
use crate::levy::LevyMeasureSpec;
use crate::localization::{LocalizerKind, LocalizerPolicy, DEFAULT_LAMBDA_MAX, DEFAULT_LAMBDA_MIN};
use crate::model::{AssetModel, CoefficientSpec, JumpCoefficientSpec, MarketSpec, MeanFunctional, ModelSpec};
use crate::payoff::PayoffSpec;
use crate::pricer::PricingConfig;

pub const DEFAULT_KOU_P: f64 = 0.6;
pub const DEFAULT_KOU_ETA1: f64 = 10.0;
pub const DEFAULT_KOU_ETA2: f64 = 5.0;

pub const DEFAULT_N_LIST: [usize; 4] = [64, 128, 256, 512];
pub const DEFAULT_MC_LIST: [usize; 4] = [200, 500, 1000, 2000];
pub const DEFAULT_REPLICATIONS: usize = 20;

/// Configurations shipped with the crate, by name.
pub const SHIPPED: [(&str, &str); 5] = [
    ("example1", include_str!("../../../configs/example1.toml")),
    ("example2", include_str!("../../../configs/example2.toml")),
    (
        "example3_conservative",
        include_str!("../../../configs/example3_conservative.toml"),
    ),
    (
        "example3_balanced",
        include_str!("../../../configs/example3_balanced.toml"),
    ),
    (
        "example3_aggressive",
        include_str!("../../../configs/example3_aggressive.toml"),
    ),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            steps: 64,
            paths: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizerSection {
    pub kind: LocalizerKind,
    /// Fixed `λ`; estimated per step when absent.
    pub lambda: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for LocalizerSection {
    fn default() -> Self {
        Self {
            kind: LocalizerKind::OneSided,
            lambda: None,
            lambda_min: DEFAULT_LAMBDA_MIN,
            lambda_max: DEFAULT_LAMBDA_MAX,
        }
    }
}

impl LocalizerSection {
    pub fn policy(&self) -> LocalizerPolicy {
        LocalizerPolicy {
            kind: self.kind,
            fixed_lambda: self.lambda,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub den_tol: f64,
    pub heaviside_offset: f64,
    pub range_clamp: bool,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            den_tol: DEFAULT_DEN_TOL,
            heaviside_offset: 0.0,
            range_clamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_list: Vec<usize>,
    pub mc_list: Vec<usize>,
    pub replications: usize,
    /// Step used by the variance study; `N/2` when absent.
    pub study_step: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n_list: DEFAULT_N_LIST.to_vec(),
            mc_list: DEFAULT_MC_LIST.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            study_step: None,
        }
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub name: String,
    pub description: String,
    pub market: MarketSpec,
    pub payoff: PayoffSpec,
    pub assets: Vec<AssetModel>,
    pub simulation: SimulationSection,
    pub localizer: LocalizerSection,
    pub estimator: EstimatorSection,
    pub fd: FdGrid,
    pub experiment: ExperimentSection,
    /// Dotted keys that were filled from defaults.
    pub defaults_used: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: String,
    market: RawMarket,
    payoff: PayoffSpec,
    assets: Vec<RawAsset>,
    #[serde(default)]
    simulation: SimulationSection,
    #[serde(default)]
    localizer: LocalizerSection,
    #[serde(default)]
    estimator: EstimatorSection,
    #[serde(default)]
    fd: FdGrid,
    #[serde(default)]
    experiment: ExperimentSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    rate: Option<f64>,
    horizon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAsset {
    x0: f64,
    drift: CoefficientSpec,
    diffusion: CoefficientSpec,
    jump: JumpCoefficientSpec,
    levy: RawLevy,
    #[serde(default)]
    mean_functional: MeanFunctional,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawLevy {
    UniformSymmetric {
        half_width: f64,
        rate: f64,
    },
    Kou {
        rate: f64,
        p: Option<f64>,
        eta1: Option<f64>,
        eta2: Option<f64>,
    },
}

impl RawLevy {
    fn resolve(self, prefix: &str, used: &mut Vec<String>) -> LevyMeasureSpec {
        match self {
            RawLevy::UniformSymmetric { half_width, rate } => LevyMeasureSpec::UniformSymmetric { half_width, rate },
            RawLevy::Kou { rate, p, eta1, eta2 } => {
                let mut take = |v: Option<f64>, key: &str, d: f64| {
                    v.unwrap_or_else(|| {
                        used.push(format!("{prefix}.levy.{key}"));
                        d
                    })
                };
                LevyMeasureSpec::Kou {
                    rate,
                    p: take(p, "p", DEFAULT_KOU_P),
                    eta1: take(eta1, "eta1", DEFAULT_KOU_ETA1),
                    eta2: take(eta2, "eta2", DEFAULT_KOU_ETA2),
                }
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut used = Vec::new();
        let rate = raw.market.rate.unwrap_or_else(|| {
            used.push("market.rate".to_string());
            0.0
        });
        let assets = raw
            .assets
            .into_iter()
            .enumerate()
            .map(|(i, a)| AssetModel {
                x0: a.x0,
                drift: a.drift,
                diffusion: a.diffusion,
                jump: a.jump,
                levy: a.levy.resolve(&format!("assets[{i}]"), &mut used),
                mean_functional: a.mean_functional,
            })
            .collect();
        let cfg = RunConfig {
            name: raw.name,
            description: raw.description,
            market: MarketSpec {
                rate,
                horizon: raw.market.horizon,
            },
            payoff: raw.payoff,
            assets,
            simulation: raw.simulation,
            localizer: raw.localizer,
            estimator: raw.estimator,
            fd: raw.fd,
            experiment: raw.experiment,
            defaults_used: used,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// One of the [`SHIPPED`] configurations.
    pub fn shipped(name: &str) -> Result<Self> {
        let (_, text) = SHIPPED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("no shipped config named `{name}`")))?;
        Self::from_toml_str(text)
    }

    pub fn validate(&self) -> Result<()> {
        self.pricing().validate()?;
        let e = &self.experiment;
        if e.n_list.is_empty() || e.mc_list.is_empty() {
            return Err(Error::Config("experiment N and MC lists must be nonempty".into()));
        }
        if e.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.fd.nodes < 3 || self.fd.time_steps < 1 {
            return Err(Error::Config("fd grid needs at least 3 nodes and one time step".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelSpec {
        ModelSpec {
            assets: self.assets.clone(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.assets.len()
    }

    /// Pricer input with the simulation section's `N`, `M` and seed.
    pub fn pricing(&self) -> PricingConfig {
        self.pricing_with(self.simulation.steps, self.simulation.paths, self.simulation.seed)
    }

    pub fn pricing_with(&self, steps: usize, paths: usize, seed: u64) -> PricingConfig {
        PricingConfig {
            seed,
            localizer: self.localizer.policy(),
            den_tol: self.estimator.den_tol,
            heaviside_offset: self.estimator.heaviside_offset,
            range_clamp: self.estimator.range_clamp,
            ..PricingConfig::new(self.model(), self.payoff.clone(), self.market, steps, paths)
        }
    }

    /// Resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The resolved configuration as `# `-prefixed lines.
    pub fn echo(&self) -> String {
        self.to_toml().lines().map(|l| format!("# {l}\n")).collect()
    }
}

/// Package version plus the git revision when built from a checkout.
pub fn version_string() -> String {
    match option_env!("MFMC_GIT_DESCRIBE") {
        Some(rev) if !rev.is_empty() => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}
