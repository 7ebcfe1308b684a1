use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exercise payoff `Φ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    /// `(K − x)⁺` on a single asset.
    Put { strike: f64 },
    /// `(K − max(x₁, x₂))⁺`
    MaxPut { strike: f64 },
    /// `inner(wᵀx)`
    Basket { weights: Vec<f64>, inner: Box<PayoffSpec> },
}

impl PayoffSpec {
    /// Number of state components the payoff reads.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            PayoffSpec::Put { .. } => Some(1),
            PayoffSpec::MaxPut { .. } => None,
            PayoffSpec::Basket { weights, .. } => Some(weights.len()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            PayoffSpec::Put { strike } => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: x.len(),
                    });
                }
                Ok((strike - x[0]).max(0.0))
            }
            PayoffSpec::MaxPut { strike } => {
                if x.is_empty() {
                    return Err(Error::DimensionMismatch { expected: 2, got: 0 });
                }
                let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok((strike - top).max(0.0))
            }
            PayoffSpec::Basket { weights, inner } => {
                if x.len() != weights.len() {
                    return Err(Error::DimensionMismatch {
                        expected: weights.len(),
                        got: x.len(),
                    });
                }
                let v: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi).sum();
                inner.eval(&[v])
            }
        }
    }

    /// Scalar shortcut for one-asset payoffs.
    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x]).expect("one-dimensional payoff")
    }

    pub fn strike(&self) -> f64 {
        match self {
            PayoffSpec::Put { strike } | PayoffSpec::MaxPut { strike } => *strike,
            PayoffSpec::Basket { inner, .. } => inner.strike(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.dimension() {
            Some(d) if d != dim => Err(Error::DimensionMismatch { expected: dim, got: d }),
            _ => Ok(()),
        }
    }
}

pub fn eval_payoff(payoff: &PayoffSpec, x: &[f64]) -> Result<f64> {
    payoff.eval(x)
}
