//! Finite-difference benchmark for one-asset American puts.
//!
//! The mean-field term is decoupled through the moment ODE `dm/dt = (α+β)m + γ`
//! of an affine drift `αx + βm + γ` (compensated jumps have mean zero), which
//! leaves a standard time-dependent PIDE
//!
//! ```text
//! ∂ₜP + μ̃ ∂ₓP + ½σ² ∂ₓ²P + ∫ (P(x+λ) − P(x)) κ(z) dz − rP = 0,   P ≥ Φ
//! ```
//!
//! with `μ̃ = b − ∫λκ`. Drift and diffusion are Crank–Nicolson (two fully
//! implicit start-up steps), the jump integral is explicit with linear
//! interpolation, and the early-exercise constraint is a projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssetModel, CoefficientSpec, MarketSpec};
use crate::payoff::PayoffSpec;
use crate::quadrature::ZQuadrature;

pub const DEFAULT_FD_NODES: usize = 1000;
pub const DEFAULT_FD_STEPS: usize = 2000;
const RANNACHER_STEPS: usize = 2;

/// `m(t)` on a uniform grid of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MomentCurve {
    /// Linear interpolation in time.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len() - 1;
        let h = self.times[n] / n as f64;
        if h == 0.0 {
            return self.values[0];
        }
        let s = (t / h).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n.saturating_sub(1));
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[(i + 1).min(n)] * w
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn affine_parts(c: &CoefficientSpec) -> Option<(f64, f64, f64)> {
    match *c {
        CoefficientSpec::Affine { state, mean, constant } => Some((state, mean, constant)),
        CoefficientSpec::Table { .. } => None,
    }
}

/// Integrates the closed mean ODE with classical RK4 on `steps` intervals.
pub fn solve_moment_ode(asset: &AssetModel, horizon: f64, steps: usize) -> Result<MomentCurve> {
    let (state, mean, constant) =
        affine_parts(&asset.drift).ok_or_else(|| Error::UnsupportedModel("moment ODE needs an affine drift".into()))?;
    if steps == 0 {
        return Err(Error::InvalidInput("moment ODE needs at least one step".into()));
    }
    let rhs = |m: f64| (state + mean) * m + constant;
    let h = horizon / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut m = asset.x0;
    times.push(0.0);
    values.push(m);
    for i in 0..steps {
        let k1 = rhs(m);
        let k2 = rhs(m + 0.5 * h * k1);
        let k3 = rhs(m + 0.5 * h * k2);
        let k4 = rhs(m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        times.push(if i + 1 == steps { horizon } else { (i + 1) as f64 * h });
        values.push(m);
    }
    Ok(MomentCurve { times, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdGrid {
    /// Spatial intervals; the grid has `nodes + 1` points.
    pub nodes: usize,
    pub time_steps: usize,
    /// Upper truncation; `None` uses `4·max(K, max_t m(t))`.
    pub x_max: Option<f64>,
}

impl Default for FdGrid {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_FD_NODES,
            time_steps: DEFAULT_FD_STEPS,
            x_max: None,
        }
    }
}

impl FdGrid {
    pub fn refined(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
            time_steps: 2 * self.time_steps,
            x_max: self.x_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    pub x: Vec<f64>,
    /// `P(0, x)` on the grid.
    pub values: Vec<f64>,
    /// `P(0, x₀)` by linear interpolation.
    pub price: f64,
    pub american: bool,
    /// Jump targets that left `[0, x_max]` and were clamped.
    pub clamped_shifts: usize,
    pub x_max: f64,
}

impl FdSolution {
    pub fn value_at(&self, x0: f64) -> f64 {
        interp(&self.x, &self.values, x0)
    }
}

fn interp(x: &[f64], v: &[f64], at: f64) -> f64 {
    let n = x.len() - 1;
    let dx = x[1] - x[0];
    let s = ((at - x[0]) / dx).clamp(0.0, n as f64);
    let i = (s.floor() as usize).min(n - 1);
    let w = s - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}

/// Thomas algorithm; `a` sub-, `b` main, `c` super-diagonal.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    let mut cp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        d[i] = (d[i] - a[i] * d[i - 1]) / den;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Brennan–Schwartz: solves the tridiagonal complementarity problem
/// `A v ≥ d, v ≥ φ` for a put, whose exercise region is an interval at the
/// low end. Eliminates the super-diagonal bottom-up, then substitutes
/// upward projecting onto `φ`.
fn solve_put_lcp(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], phi: &[f64]) {
    let n = d.len();
    let mut bp = b.to_vec();
    for i in (0..n - 1).rev() {
        let f = c[i] / bp[i + 1];
        bp[i] -= f * a[i + 1];
        d[i] -= f * d[i + 1];
    }
    d[0] = (d[0] / bp[0]).max(phi[0]);
    for i in 1..n {
        d[i] = ((d[i] - a[i] * d[i - 1]) / bp[i]).max(phi[i]);
    }
}

/// Solves the American (or, with `american = false`, European) put PIDE.
pub fn solve_pide(
    asset: &AssetModel,
    payoff: &PayoffSpec,
    market: &MarketSpec,
    grid: &FdGrid,
    american: bool,
) -> Result<FdSolution> {
    let strike = match payoff {
        PayoffSpec::Put { strike } => *strike,
        _ => {
            return Err(Error::UnsupportedModel(
                "finite differences support the one-asset put".into(),
            ))
        }
    };
    if grid.nodes < 4 || grid.time_steps < 1 {
        return Err(Error::InvalidInput("FD grid too small".into()));
    }
    let horizon = market.horizon;
    let r = market.rate;
    let n_t = grid.time_steps;
    let moments = solve_moment_ode(asset, horizon, 2 * n_t)?;
    let x_max = grid.x_max.unwrap_or(4.0 * strike.max(moments.max()));
    let j = grid.nodes;
    let dx = x_max / j as f64;
    let dt = horizon / n_t as f64;
    let x: Vec<f64> = (0..=j).map(|i| i as f64 * dx).collect();
    let phi: Vec<f64> = x.iter().map(|&xi| (strike - xi).max(0.0)).collect();
    let quad = ZQuadrature::for_measure(&asset.levy);
    let mut clamped = 0usize;

    let mut p = phi.clone();
    let lower = |t: f64| {
        if american {
            strike
        } else {
            strike * (-r * (horizon - t)).exp()
        }
    };

    // interior unknowns i = 1..j-1
    let n_in = j - 1;
    let mut sub = vec![0.0; n_in];
    let mut diag = vec![0.0; n_in];
    let mut sup = vec![0.0; n_in];
    let mut rhs = vec![0.0; n_in];
    let mut op_lo = vec![0.0; n_in];
    let mut op_mid = vec![0.0; n_in];
    let mut op_hi = vec![0.0; n_in];
    let mut jump_term = vec![0.0; n_in];

    for step in (0..n_t).rev() {
        let t_mid = (step as f64 + 0.5) * dt;
        let t_new = step as f64 * dt;
        let m = moments.at(t_mid);
        let theta = if n_t - step <= RANNACHER_STEPS { 1.0 } else { 0.5 };

        for i in 1..j {
            let xi = x[i];
            let c = asset.eval_coefficients(t_mid, xi, m)?;
            let mut comp = 0.0;
            let mut integral = 0.0;
            for (&z, &w) in quad.nodes.iter().zip(&quad.weights) {
                let lam = asset.jump.terms(t_mid, xi, z, m).lambda;
                comp += w * lam;
                let target = xi + lam;
                let shifted = if target <= 0.0 {
                    clamped += 1;
                    p[0]
                } else if target >= x_max {
                    clamped += 1;
                    p[j]
                } else {
                    interp(&x, &p, target)
                };
                integral += w * (shifted - p[i]);
            }
            let mu = c.drift - comp;
            let s2 = c.diffusion * c.diffusion;
            let (lo, hi) = if mu.abs() * dx > s2 {
                // upwind
                if mu > 0.0 {
                    (0.5 * s2 / (dx * dx), 0.5 * s2 / (dx * dx) + mu / dx)
                } else {
                    (0.5 * s2 / (dx * dx) - mu / dx, 0.5 * s2 / (dx * dx))
                }
            } else {
                (
                    0.5 * s2 / (dx * dx) - 0.5 * mu / dx,
                    0.5 * s2 / (dx * dx) + 0.5 * mu / dx,
                )
            };
            let k = i - 1;
            op_lo[k] = lo;
            op_hi[k] = hi;
            op_mid[k] = -lo - hi - r;
            jump_term[k] = integral;
        }

        let b_new = lower(t_new);
        for k in 0..n_in {
            let i = k + 1;
            let explicit = op_lo[k] * p[i - 1] + op_mid[k] * p[i] + op_hi[k] * p[i + 1];
            rhs[k] = p[i] / dt + (1.0 - theta) * explicit + jump_term[k];
            sub[k] = -theta * op_lo[k];
            diag[k] = 1.0 / dt - theta * op_mid[k];
            sup[k] = -theta * op_hi[k];
        }
        // P(x_max) = 0 contributes nothing on the right
        rhs[0] -= sub[0] * b_new;
        if american {
            solve_put_lcp(&sub, &diag, &sup, &mut rhs, &phi[1..j]);
        } else {
            solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        }

        p[0] = b_new;
        p[j] = 0.0;
        p[1..=n_in].copy_from_slice(&rhs[..n_in]);
        if p.iter().any(|v| !v.is_finite() || v.abs() > 1e6 * (strike + x_max)) {
            return Err(Error::FdInstability { t: t_new });
        }
    }

    let price = interp(&x, &p, asset.x0);
    Ok(FdSolution {
        x,
        values: p,
        price,
        american,
        clamped_shifts: clamped,
        x_max,
    })
}

pub fn solve_american_pide(
    asset: &AssetModel,
    payoff: &PayoffSpec,
    market: &MarketSpec,
    grid: &FdGrid,
) -> Result<FdSolution> {
    solve_pide(asset, payoff, market, grid, true)
}

pub fn solve_european_pide(
    asset: &AssetModel,
    payoff: &PayoffSpec,
    market: &MarketSpec,
    grid: &FdGrid,
) -> Result<FdSolution> {
    solve_pide(asset, payoff, market, grid, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasureSpec;
    use crate::model::{JumpCoefficientSpec, MeanFunctional};

    fn asset(a_state: f64, a_mean: f64, x0: f64) -> AssetModel {
        AssetModel {
            x0,
            drift: CoefficientSpec::affine(a_state, a_mean, 0.0),
            diffusion: CoefficientSpec::affine(0.5, 0.0, 0.0),
            jump: JumpCoefficientSpec::PureAmplitude,
            levy: LevyMeasureSpec::Kou {
                rate: 10.0,
                p: 0.6,
                eta1: 10.0,
                eta2: 5.0,
            },
            mean_functional: MeanFunctional::Identity,
        }
    }

    #[test]
    fn moment_curve_closed_forms() {
        let flat = solve_moment_ode(&asset(0.0, 0.0, 3.0), 1.0, 100).unwrap();
        assert!(flat.values.iter().all(|&v| v == 3.0));
        let ex1 = solve_moment_ode(&asset(1.0, 1.0, 1.0), 1.0, 1000).unwrap();
        let e2 = 2f64.exp();
        assert!((ex1.values[1000] - e2).abs() <= 1e-10 * e2);
        let ex2 = solve_moment_ode(&asset(0.0, 1.0, 10.0), 1.0, 200).unwrap();
        let target = 10.0 * 1f64.exp();
        assert!((ex2.values[200] - target).abs() <= 1e-10 * target);
        assert!((ex2.at(0.5) - 10.0 * 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn table_drift_is_unsupported() {
        let mut a = asset(0.0, 1.0, 10.0);
        a.drift = CoefficientSpec::Table {
            points: vec![(0.0, 1.0)],
        };
        assert!(matches!(solve_moment_ode(&a, 1.0, 10), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn frozen_state_returns_the_payoff() {
        let mut a = asset(0.0, 0.0, 30.0);
        a.diffusion = CoefficientSpec::zero();
        a.levy = a.levy.with_rate(0.0);
        let put = PayoffSpec::Put { strike: 40.0 };
        let market = MarketSpec {
            rate: 0.0,
            horizon: 1.0,
        };
        let grid = FdGrid {
            nodes: 200,
            time_steps: 100,
            x_max: None,
        };
        let sol = solve_american_pide(&a, &put, &market, &grid).unwrap();
        for (xi, v) in sol.x.iter().zip(&sol.values) {
            assert!((v - (40.0 - xi).max(0.0)).abs() < 1e-12, "x={xi} v={v}");
        }
    }

    #[test]
    fn american_surface_is_monotone_and_dominates() {
        let a = asset(0.0, 1.0, 10.0);
        let put = PayoffSpec::Put { strike: 60.0 };
        let market = MarketSpec {
            rate: 0.05,
            horizon: 1.0,
        };
        let grid = FdGrid {
            nodes: 400,
            time_steps: 400,
            x_max: None,
        };
        let am = solve_american_pide(&a, &put, &market, &grid).unwrap();
        let eu = solve_european_pide(&a, &put, &market, &grid).unwrap();
        for i in 0..am.x.len() {
            assert!(am.values[i] >= (60.0 - am.x[i]).max(0.0));
            assert!(eu.values[i] <= am.values[i] + 1e-12);
            if i > 0 {
                assert!(am.values[i] <= am.values[i - 1] + 1e-8);
            }
        }
    }
}
