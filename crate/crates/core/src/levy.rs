//! Finite-activity Lévy measures `ν(dz) = κ(z) dz`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Kou parameters used when a config leaves them out.
pub const KOU_DEFAULT_P: f64 = 0.6;
pub const KOU_DEFAULT_ETA1: f64 = 10.0;
pub const KOU_DEFAULT_ETA2: f64 = 5.0;

/// Tail cut for Kou quadrature, in units of the slower decay rate.
const KOU_TRUNCATION: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyMeasureSpec {
    /// `κ(z) = rate` on `|z| < half_width`.
    UniformSymmetric { half_width: f64, rate: f64 },
    /// Double exponential: `rate·(p η₁ e^{−η₁ z} 𝟙{z>0} + (1−p) η₂ e^{−η₂|z|} 𝟙{z<0})`.
    Kou { rate: f64, p: f64, eta1: f64, eta2: f64 },
}

impl LevyMeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LevyMeasureSpec::UniformSymmetric { half_width, rate } => {
                if !(half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "uniform half_width must be positive, got {half_width}"
                    )));
                }
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "jump rate must be nonnegative, got {rate}"
                    )));
                }
            }
            LevyMeasureSpec::Kou { rate, p, eta1, eta2 } => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "jump rate must be nonnegative, got {rate}"
                    )));
                }
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidInput(format!("Kou p must lie in (0,1), got {p}")));
                }
                if !(eta1 > 0.0 && eta2 > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "Kou rates must be positive, got eta1={eta1}, eta2={eta2}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        match *self {
            LevyMeasureSpec::UniformSymmetric { rate, .. } | LevyMeasureSpec::Kou { rate, .. } => rate,
        }
    }

    /// Same measure with a different rate multiplier.
    pub fn with_rate(&self, new_rate: f64) -> Self {
        let mut m = self.clone();
        match &mut m {
            LevyMeasureSpec::UniformSymmetric { rate, .. } | LevyMeasureSpec::Kou { rate, .. } => *rate = new_rate,
        }
        m
    }

    /// `κ(z)`, zero outside the support.
    pub fn density(&self, z: f64) -> f64 {
        match *self {
            LevyMeasureSpec::UniformSymmetric { half_width, rate } => {
                if z.abs() < half_width && z != 0.0 {
                    rate
                } else {
                    0.0
                }
            }
            LevyMeasureSpec::Kou { rate, p, eta1, eta2 } => {
                if z > 0.0 {
                    rate * p * eta1 * (-eta1 * z).exp()
                } else if z < 0.0 {
                    rate * (1.0 - p) * eta2 * (-eta2 * z.abs()).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `∂_z log κ(z)`; `None` where `κ(z) = 0`.
    pub fn grad_log(&self, z: f64) -> Option<f64> {
        if self.density(z) <= 0.0 {
            return None;
        }
        match *self {
            LevyMeasureSpec::UniformSymmetric { .. } => Some(0.0),
            LevyMeasureSpec::Kou { eta1, eta2, .. } => {
                if z > 0.0 {
                    Some(-eta1)
                } else {
                    Some(eta2)
                }
            }
        }
    }

    pub fn in_support(&self, z: f64) -> bool {
        self.with_rate(1.0).density(z) > 0.0
    }

    /// Total intensity `Λ = ∫ κ(z) dz`.
    pub fn total_intensity(&self) -> f64 {
        match *self {
            LevyMeasureSpec::UniformSymmetric { half_width, rate } => 2.0 * half_width * rate,
            LevyMeasureSpec::Kou { rate, .. } => rate,
        }
    }

    /// Mass constant `∫ (1 ∧ |z|²) κ(z) dz`.
    ///
    /// Closed form for the uniform law; for Kou the `|z| ≤ 1` part goes
    /// through adaptive quadrature (relative tolerance 1e−10) and the tail
    /// mass `κ`-integral beyond one is exact.
    pub fn mass_a(&self) -> Result<f64> {
        match *self {
            LevyMeasureSpec::UniformSymmetric { half_width, rate } => {
                let inner = half_width.min(1.0);
                let outer = (half_width - 1.0).max(0.0);
                Ok(rate * 2.0 * (inner.powi(3) / 3.0 + outer))
            }
            LevyMeasureSpec::Kou { rate, p, eta1, eta2 } => {
                let side = |eta: f64| -> Result<f64> {
                    let body = adaptive_simpson(|z| z * z * eta * (-eta * z).exp(), 0.0, 1.0, 1e-10)?;
                    Ok(body + (-eta).exp())
                };
                Ok(rate * (p * side(eta1)? + (1.0 - p) * side(eta2)?))
            }
        }
    }

    /// Integration panels covering the support, split at `0` and `±1`.
    pub fn quadrature_panels(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = match *self {
            LevyMeasureSpec::UniformSymmetric { half_width, .. } => (-half_width, half_width),
            LevyMeasureSpec::Kou { eta1, eta2, .. } => {
                let zmax = KOU_TRUNCATION / eta1.min(eta2);
                (-zmax, zmax)
            }
        };
        let mut cuts = vec![lo];
        for c in [-1.0, 0.0, 1.0] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.push(hi);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Draws one mark from `κ/Λ`.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LevyMeasureSpec::UniformSymmetric { half_width, .. } => loop {
                let z = rng.random_range(-half_width..half_width);
                if z != 0.0 && z.abs() < half_width {
                    return z;
                }
            },
            LevyMeasureSpec::Kou { p, eta1, eta2, .. } => {
                let up = rng.random::<f64>() < p;
                let eta = if up { eta1 } else { eta2 };
                let mag = loop {
                    let e: f64 = Exp::new(eta).expect("positive rate").sample(rng);
                    if e > 0.0 {
                        break e;
                    }
                };
                if up {
                    mag
                } else {
                    -mag
                }
            }
        }
    }

    /// Jump marks arriving in an interval of length `dt`.
    pub fn sample_jumps<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Vec<f64> {
        let mean = self.total_intensity() * dt;
        if mean <= 0.0 {
            return Vec::new();
        }
        let count = Poisson::new(mean).expect("finite positive mean").sample(rng) as usize;
        (0..count).map(|_| self.sample_mark(rng)).collect()
    }
}

/// Free-function form of [`LevyMeasureSpec::density`].
pub fn levy_density(measure: &LevyMeasureSpec, z: f64) -> f64 {
    measure.density(z)
}

/// Free-function form of [`LevyMeasureSpec::grad_log`].
pub fn levy_grad_log(measure: &LevyMeasureSpec, z: f64) -> Option<f64> {
    measure.grad_log(z)
}

/// Free-function form of [`LevyMeasureSpec::mass_a`].
pub fn levy_mass_a(measure: &LevyMeasureSpec) -> Result<f64> {
    measure.mass_a()
}
