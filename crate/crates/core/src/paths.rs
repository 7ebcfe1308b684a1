//! Euler simulation of the interacting particle system.
//!
//! The expectation in every coefficient is replaced by the empirical mean of
//! the same ensemble, recomputed once per step before any path advances.
//! Each step applies, per path,
//!
//! ```text
//! X ← X + b Δt + σ ΔW − Δt ∫ λ κ dz          Y ← Y (1 + A Δt + B ΔW − Δt ∫ M κ dz)
//! X ← X + λ(t_k, X, z_j, m̂)                  Y ← Y (1 + M(t_k, X, z_j, m̂))   for each jump j
//! ```
//!
//! with jumps composed sequentially at the post-diffusion state.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssetModel, ModelSpec};
use crate::quadrature::ZQuadrature;
use crate::rng::{path_stream, PathRng};

/// Smallest admissible jump factor `1 + M` for the first variation.
pub const MIN_JUMP_FACTOR: f64 = 1e-12;

/// Uniform grid `t_k = k T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub steps: usize,
    pub horizon: f64,
}

impl TimeGrid {
    pub fn new(steps: usize, horizon: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidInput("time grid needs at least one step".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { steps, horizon })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Knot `t_k`; the last knot is the horizon exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }
}

/// One jump of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Step index `k`, the jump lies in `(t_k, t_{k+1}]`.
    pub step: usize,
    pub time: f64,
    pub mark: f64,
    pub pre_state: f64,
    pub pre_variation: f64,
}

/// Simulated paths of one asset, stored knot-major: entry `(k, m)` lives at
/// `k * path_count + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPaths {
    pub states: Vec<f64>,
    pub variations: Vec<f64>,
    pub mean_stats: Vec<f64>,
    /// Per path, in time order.
    pub jumps: Vec<Vec<JumpEvent>>,
    path_count: usize,
}

impl AssetPaths {
    fn new(path_count: usize, steps: usize, x0: f64, mean0: f64) -> Self {
        let mut states = vec![0.0; (steps + 1) * path_count];
        let mut variations = vec![0.0; (steps + 1) * path_count];
        states[..path_count].fill(x0);
        variations[..path_count].fill(1.0);
        let mut mean_stats = vec![0.0; steps + 1];
        mean_stats[0] = mean0;
        Self {
            states,
            variations,
            mean_stats,
            jumps: vec![Vec::new(); path_count],
            path_count,
        }
    }

    /// `X_{t_k}` across paths.
    pub fn states_at(&self, k: usize) -> &[f64] {
        &self.states[k * self.path_count..(k + 1) * self.path_count]
    }

    /// `Y_{t_k}` across paths.
    pub fn variations_at(&self, k: usize) -> &[f64] {
        &self.variations[k * self.path_count..(k + 1) * self.path_count]
    }

    pub fn state(&self, k: usize, m: usize) -> f64 {
        self.states[k * self.path_count + m]
    }

    pub fn variation(&self, k: usize, m: usize) -> f64 {
        self.variations[k * self.path_count + m]
    }

    pub fn path_count(&self) -> usize {
        self.path_count
    }
}

/// The simulated ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub seed: u64,
    pub assets: Vec<AssetPaths>,
    path_count: usize,
}

impl PathBundle {
    pub fn path_count(&self) -> usize {
        self.path_count
    }

    pub fn dimension(&self) -> usize {
        self.assets.len()
    }

    /// Empirical mean statistic `ρ̂_{t_k}` of one asset.
    pub fn empirical_mean(&self, asset: usize, k: usize) -> f64 {
        self.assets[asset].mean_stats[k]
    }

    /// State vector of path `m` at knot `k`.
    pub fn state_vector(&self, k: usize, m: usize) -> Vec<f64> {
        self.assets.iter().map(|a| a.state(k, m)).collect()
    }
}

/// Arithmetic mean in path order.
pub fn empirical_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

struct StepOutcome {
    state: f64,
    variation: f64,
    jumps: Vec<JumpEvent>,
}

/// Step-by-step simulator. [`simulate_ensemble`] drives it to the horizon;
/// driving it by hand allows reseeding part-way.
pub struct Simulator<'a> {
    model: &'a ModelSpec,
    grid: TimeGrid,
    quads: Vec<ZQuadrature>,
    rngs: Vec<Vec<PathRng>>,
    assets: Vec<AssetPaths>,
    seed: u64,
    path_count: usize,
    k: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a ModelSpec, grid: TimeGrid, path_count: usize, seed: u64) -> Result<Self> {
        model.validate()?;
        if path_count < 2 {
            return Err(Error::InvalidInput(format!(
                "at least two paths are required, got {path_count}"
            )));
        }
        let quads = model.assets.iter().map(|a| ZQuadrature::for_measure(&a.levy)).collect();
        let assets = model
            .assets
            .iter()
            .map(|a| AssetPaths::new(path_count, grid.steps, a.x0, a.mean_functional.apply(a.x0)))
            .collect();
        let mut sim = Self {
            model,
            grid,
            quads,
            rngs: Vec::new(),
            assets,
            seed,
            path_count,
            k: 0,
        };
        sim.reseed(seed);
        Ok(sim)
    }

    /// Replaces every path stream; draws after this point depend on `seed` only.
    pub fn reseed(&mut self, seed: u64) {
        self.rngs = (0..self.model.dimension())
            .map(|a| (0..self.path_count).map(|m| path_stream(seed, a, m)).collect())
            .collect();
    }

    pub fn current_step(&self) -> usize {
        self.k
    }

    pub fn is_done(&self) -> bool {
        self.k == self.grid.steps
    }

    /// Advances every path from `t_k` to `t_{k+1}`.
    pub fn step(&mut self) -> Result<()> {
        if self.is_done() {
            return Err(Error::InvalidInput("simulation already reached the horizon".into()));
        }
        let k = self.k;
        let t = self.grid.time(k);
        let t_next = self.grid.time(k + 1);
        let dt = self.grid.dt();
        let n = self.path_count;
        for (a, asset) in self.model.assets.iter().enumerate() {
            let paths = &mut self.assets[a];
            let mean = paths.mean_stats[k];
            let quad = &self.quads[a];
            let xs = &paths.states[k * n..(k + 1) * n];
            let ys = &paths.variations[k * n..(k + 1) * n];
            let outcomes: Vec<Result<StepOutcome>> = self.rngs[a]
                .par_iter_mut()
                .enumerate()
                .map(|(m, rng)| advance_path(asset, quad, rng, m, k, t, t_next, dt, xs[m], ys[m], mean))
                .collect();
            let mut next_states = Vec::with_capacity(n);
            let mut next_vars = Vec::with_capacity(n);
            for (m, out) in outcomes.into_iter().enumerate() {
                let out = out?;
                next_states.push(out.state);
                next_vars.push(out.variation);
                paths.jumps[m].extend(out.jumps);
            }
            let phi = asset.mean_functional;
            paths.mean_stats[k + 1] = next_states.iter().map(|&x| phi.apply(x)).sum::<f64>() / n as f64;
            paths.states[(k + 1) * n..(k + 2) * n].copy_from_slice(&next_states);
            paths.variations[(k + 1) * n..(k + 2) * n].copy_from_slice(&next_vars);
        }
        self.k += 1;
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBundle> {
        self.run_to_end()?;
        Ok(PathBundle {
            grid: self.grid,
            seed: self.seed,
            assets: self.assets,
            path_count: self.path_count,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn advance_path(
    asset: &AssetModel,
    quad: &ZQuadrature,
    rng: &mut PathRng,
    path: usize,
    k: usize,
    t: f64,
    t_next: f64,
    dt: f64,
    x: f64,
    y: f64,
    mean: f64,
) -> Result<StepOutcome> {
    let coef = asset.eval_coefficients(t, x, mean)?;
    let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let (comp_lambda, comp_m) = if quad.is_empty() {
        (0.0, 0.0)
    } else {
        let mut cl = 0.0;
        let mut cm = 0.0;
        for (&z, &w) in quad.nodes.iter().zip(&quad.weights) {
            let j = asset.jump.terms(t, x, z, mean);
            cl += w * j.lambda;
            cm += w * j.dx;
        }
        (cl, cm)
    };
    let mut state = x + coef.drift * dt + coef.diffusion * dw - comp_lambda * dt;
    let mut variation = y * (1.0 + coef.drift_dx * dt + coef.diffusion_dx * dw - comp_m * dt);

    let marks = asset.levy.sample_jumps(dt, rng);
    let mut times: Vec<f64> = marks
        .iter()
        .map(|_| t_next - (t_next - t) * rng.random::<f64>())
        .collect();
    times.sort_by(f64::total_cmp);

    let mut jumps = Vec::with_capacity(marks.len());
    for (&z, &tau) in marks.iter().zip(&times) {
        let j = asset.jump.terms(t, state, z, mean);
        let factor = 1.0 + j.dx;
        if factor <= MIN_JUMP_FACTOR {
            return Err(Error::DegenerateVariation { path, t: tau, factor });
        }
        jumps.push(JumpEvent {
            step: k,
            time: tau,
            mark: z,
            pre_state: state,
            pre_variation: variation,
        });
        state += j.lambda;
        variation *= factor;
    }
    if !state.is_finite() {
        return Err(Error::ModelEvaluation {
            coefficient: "state update",
            t,
            x,
            m: mean,
        });
    }
    Ok(StepOutcome {
        state,
        variation,
        jumps,
    })
}

/// Simulates `path_count` particles on `grid`.
pub fn simulate_ensemble(model: &ModelSpec, grid: TimeGrid, path_count: usize, seed: u64) -> Result<PathBundle> {
    Simulator::new(model, grid, path_count, seed)?.finish()
}
