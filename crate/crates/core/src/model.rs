//! Mean-field jump-SDE model family.
//!
//! Each asset follows
//!
//! ```text
//! dX = b(t, X, E[X]) dt + σ(t, X, E[X]) dW + ∫ λ(t, X⁻, z, E[X]) Ñ(dz, dt)
//! ```
//!
//! with its own Brownian motion and Poisson random measure. All state
//! derivatives are closed form per variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::LevyMeasureSpec;

/// Drift or diffusion coefficient `f(t, x, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    /// `state·x + mean·m + constant`
    Affine {
        #[serde(default)]
        state: f64,
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        constant: f64,
    },
    /// Piecewise-linear in time, flat beyond the end knots; independent of x and m.
    Table { points: Vec<(f64, f64)> },
}

impl CoefficientSpec {
    pub fn affine(state: f64, mean: f64, constant: f64) -> Self {
        CoefficientSpec::Affine { state, mean, constant }
    }

    pub fn zero() -> Self {
        Self::affine(0.0, 0.0, 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::affine(0.0, 0.0, c)
    }

    /// `(f(t, x, m), ∂ₓf(t, x, m))`
    pub fn eval(&self, t: f64, x: f64, m: f64) -> (f64, f64) {
        match self {
            CoefficientSpec::Affine { state, mean, constant } => (state * x + mean * m + constant, *state),
            CoefficientSpec::Table { points } => (interpolate(points, t), 0.0),
        }
    }

    /// `(∂ₘf)`, the sensitivity to the mean statistic.
    pub fn mean_sensitivity(&self) -> f64 {
        match self {
            CoefficientSpec::Affine { mean, .. } => *mean,
            CoefficientSpec::Table { .. } => 0.0,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            CoefficientSpec::Affine { state, mean, constant } => {
                if !(state.is_finite() && mean.is_finite() && constant.is_finite()) {
                    return Err(Error::InvalidInput(format!("{name}: non-finite coefficient")));
                }
            }
            CoefficientSpec::Table { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidInput(format!("{name}: empty table")));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidInput(format!(
                        "{name}: table times must be strictly increasing"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= t);
    let (t0, v0) = points[i - 1];
    let (t1, v1) = points[i];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Jump amplitude `λ(t, x, z, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpCoefficientSpec {
    /// `c·z·(m + x)`
    LinearMeanField { c: f64 },
    /// `|z|²`
    PureAmplitude,
    /// `λ₀(t, x, m)·z + lam·x`
    AffineInZ { lambda0: CoefficientSpec, lam: f64 },
}

/// Jump amplitude and the derivatives entering the Malliavin kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpTerms {
    pub lambda: f64,
    /// `∂_z λ`
    pub dz: f64,
    /// `∂_z² λ`
    pub dzz: f64,
    /// `M = ∂ₓ λ`
    pub dx: f64,
    /// `∂_z M`
    pub dz_dx: f64,
}

impl JumpCoefficientSpec {
    /// Evaluates λ and its derivatives without the singularity check.
    pub fn terms(&self, t: f64, x: f64, z: f64, m: f64) -> JumpTerms {
        match self {
            JumpCoefficientSpec::LinearMeanField { c } => JumpTerms {
                lambda: c * z * (m + x),
                dz: c * (m + x),
                dzz: 0.0,
                dx: c * z,
                dz_dx: *c,
            },
            JumpCoefficientSpec::PureAmplitude => JumpTerms {
                lambda: z * z,
                dz: 2.0 * z,
                dzz: 2.0,
                dx: 0.0,
                dz_dx: 0.0,
            },
            JumpCoefficientSpec::AffineInZ { lambda0, lam } => {
                let (l0, dl0) = lambda0.eval(t, x, m);
                JumpTerms {
                    lambda: l0 * z + lam * x,
                    dz: l0,
                    dzz: 0.0,
                    dx: dl0 * z + lam,
                    dz_dx: dl0,
                }
            }
        }
    }

    /// Whether λ vanishes identically, so the asset has no jump component.
    pub fn is_zero(&self) -> bool {
        match self {
            JumpCoefficientSpec::LinearMeanField { c } => *c == 0.0,
            JumpCoefficientSpec::PureAmplitude => false,
            JumpCoefficientSpec::AffineInZ { lambda0, lam } => *lam == 0.0 && *lambda0 == CoefficientSpec::zero(),
        }
    }
}

/// Mean-field functional applied before averaging. Only the identity is
/// supported, so `ρ = π = η = E[X]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFunctional {
    #[default]
    Identity,
}

impl MeanFunctional {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            MeanFunctional::Identity => x,
        }
    }
}

/// One asset of the (diagonal) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetModel {
    pub x0: f64,
    pub drift: CoefficientSpec,
    pub diffusion: CoefficientSpec,
    pub jump: JumpCoefficientSpec,
    pub levy: LevyMeasureSpec,
    #[serde(default)]
    pub mean_functional: MeanFunctional,
}

/// Coefficients and their state derivatives `A = ∂ₓb`, `B = ∂ₓσ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub drift: f64,
    pub diffusion: f64,
    pub drift_dx: f64,
    pub diffusion_dx: f64,
}

impl AssetModel {
    pub fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::InvalidInput("initial state must be finite".into()));
        }
        self.drift.validate("drift")?;
        self.diffusion.validate("diffusion")?;
        if let JumpCoefficientSpec::AffineInZ { lambda0, .. } = &self.jump {
            lambda0.validate("lambda0")?;
        }
        self.levy.validate()
    }

    pub fn eval_coefficients(&self, t: f64, x: f64, m: f64) -> Result<Coefficients> {
        let (drift, drift_dx) = self.drift.eval(t, x, m);
        if !(drift.is_finite() && drift_dx.is_finite()) {
            return Err(Error::ModelEvaluation {
                coefficient: "drift",
                t,
                x,
                m,
            });
        }
        let (diffusion, diffusion_dx) = self.diffusion.eval(t, x, m);
        if !(diffusion.is_finite() && diffusion_dx.is_finite()) {
            return Err(Error::ModelEvaluation {
                coefficient: "diffusion",
                t,
                x,
                m,
            });
        }
        Ok(Coefficients {
            drift,
            diffusion,
            drift_dx,
            diffusion_dx,
        })
    }

    /// Jump terms with the `∂_zλ ≠ 0` contract enforced.
    pub fn eval_jump(&self, t: f64, x: f64, z: f64, m: f64) -> Result<JumpTerms> {
        let j = self.jump.terms(t, x, z, m);
        if ![j.lambda, j.dz, j.dzz, j.dx, j.dz_dx].iter().all(|v| v.is_finite()) {
            return Err(Error::ModelEvaluation {
                coefficient: "jump amplitude",
                t,
                x,
                m,
            });
        }
        if j.dz == 0.0 {
            return Err(Error::SingularJumpCoefficient { t, x, z });
        }
        Ok(j)
    }
}

/// The full model: one entry per asset, assets mutually independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub assets: Vec<AssetModel>,
}

impl ModelSpec {
    pub fn single(asset: AssetModel) -> Self {
        Self { assets: vec![asset] }
    }

    pub fn dimension(&self) -> usize {
        self.assets.len()
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.assets.iter().map(|a| a.x0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.assets.len()) {
            return Err(Error::InvalidInput(format!(
                "dimension must be 1 or 2, got {}",
                self.assets.len()
            )));
        }
        self.assets.iter().try_for_each(AssetModel::validate)
    }
}

/// Free-function form of [`AssetModel::eval_coefficients`].
pub fn eval_coefficients(asset: &AssetModel, t: f64, x: f64, m: f64) -> Result<Coefficients> {
    asset.eval_coefficients(t, x, m)
}

/// Free-function form of [`AssetModel::eval_jump`].
pub fn eval_jump(asset: &AssetModel, t: f64, x: f64, z: f64, m: f64) -> Result<JumpTerms> {
    asset.eval_jump(t, x, z, m)
}

/// Constant short rate and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    #[serde(default)]
    pub rate: f64,
    pub horizon: f64,
}

impl MarketSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::InvalidInput("rate must be finite".into()));
        }
        Ok(())
    }
}
