//! Poisson-space Malliavin weights.
//!
//! The kernel is the divergence `∂_z(κ w)/κ` of the direction
//! `w = (1∧z²)(1+M)/∂_zλ`:
//!
//! ```text
//! 𝒥(r,z) = [ (1∧z²)/∂_zλ · (∂_z log κ − ∂_z²λ/∂_zλ) + 2z𝟙{|z|≤1}/∂_zλ ] · (1+M)
//!        + (1∧z²) ∂_zM / ∂_zλ
//! ```
//!
//! is integrated against the compensated Poisson measure along each path,
//! `U_k = ∫₀^{t_k}∫ Y_r 𝒥(r,z) Ñ(dz,dr)`, forward in time. Every window
//! weight is then a difference of two accumulator values:
//!
//! ```text
//! Π₁^α = U_k / Y_k
//! 𝒢    = (U_{k+1} − U_k) / ((t−s) 𝔄 Y_k)
//! Π    = 𝒢 − Π₁^α / (s 𝔄)
//! ```
//!
//! `Π` is oriented so that `E[g′(X_s)] = E[g(X_s) Π]`, the sign the localized
//! estimator needs; `Π₁^α/(s𝔄) − 𝒢` satisfies the duality with a minus sign.
//! The identity needs `κ·w` to vanish on the boundary of the Lévy support,
//! which fails for the uniform measure (`w ≠ 0` at `±h`).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::AssetModel;
use crate::paths::PathBundle;
use crate::quadrature::ZQuadrature;

/// Smallest `|Y_s|` accepted when forming window weights.
pub const MIN_VARIATION: f64 = 1e-12;

/// Evaluates `𝒥(r, z)` at state `x` and mean statistic `m`.
pub fn kernel_j(asset: &AssetModel, r: f64, x: f64, z: f64, m: f64) -> Result<f64> {
    let grad_log = asset
        .levy
        .grad_log(z)
        .ok_or_else(|| Error::InvalidInput(format!("kernel evaluated outside the Lévy support at z={z}")))?;
    let j = asset.eval_jump(r, x, z, m)?;
    let trunc = (z * z).min(1.0);
    let indicator = if z.abs() <= 1.0 { 1.0 } else { 0.0 };
    let dw = trunc / j.dz * (grad_log - j.dzz / j.dz) + 2.0 * z * indicator / j.dz;
    Ok(dw * (1.0 + j.dx) + trunc * j.dz_dx / j.dz)
}

/// Forward accumulator `U_k^m` for one asset, knot-major.
///
/// The jump sums and compensator sums are kept separately for diagnostics;
/// `U = jump_part − compensator_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAccumulator {
    pub jump_part: Vec<f64>,
    pub compensator_part: Vec<f64>,
    path_count: usize,
}

impl WeightAccumulator {
    pub fn value(&self, k: usize, m: usize) -> f64 {
        let i = k * self.path_count + m;
        self.jump_part[i] - self.compensator_part[i]
    }

    /// `U_k` across paths.
    pub fn values_at(&self, k: usize) -> Vec<f64> {
        (0..self.path_count).map(|m| self.value(k, m)).collect()
    }

    pub fn path_count(&self) -> usize {
        self.path_count
    }
}

/// Fills `U_k^m` for every knot and path of asset `asset_index`.
///
/// The compensator uses the left-endpoint rule
/// `ε Σᵢ wᵢ Y_{t_k} 𝒥(t_k, X_{t_k}, zᵢ)`.
pub fn accumulate_weights(
    bundle: &PathBundle,
    asset_index: usize,
    asset: &AssetModel,
    quad: &ZQuadrature,
) -> Result<WeightAccumulator> {
    let paths = &bundle.assets[asset_index];
    let n = bundle.path_count();
    let steps = bundle.grid.steps;
    let dt = bundle.grid.dt();

    let per_path: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|m| {
            let mut jump = vec![0.0; steps + 1];
            let mut comp = vec![0.0; steps + 1];
            let events = &paths.jumps[m];
            let mut next_event = 0;
            for k in 0..steps {
                let mean = paths.mean_stats[k];
                let mut jump_inc = 0.0;
                while next_event < events.len() && events[next_event].step == k {
                    let e = &events[next_event];
                    jump_inc += e.pre_variation * kernel_j(asset, e.time, e.pre_state, e.mark, mean)?;
                    next_event += 1;
                }
                let t = bundle.grid.time(k);
                let x = paths.state(k, m);
                let y = paths.variation(k, m);
                let comp_inc = if quad.is_empty() {
                    0.0
                } else {
                    dt * y * quad.try_integrate(|z| kernel_j(asset, t, x, z, mean))?
                };
                jump[k + 1] = jump[k] + jump_inc;
                comp[k + 1] = comp[k] + comp_inc;
            }
            Ok((jump, comp))
        })
        .collect();

    let mut jump_part = vec![0.0; (steps + 1) * n];
    let mut compensator_part = vec![0.0; (steps + 1) * n];
    for (m, res) in per_path.into_iter().enumerate() {
        let (j, c) = res?;
        for k in 0..=steps {
            jump_part[k * n + m] = j[k];
            compensator_part[k * n + m] = c[k];
        }
    }
    Ok(WeightAccumulator {
        jump_part,
        compensator_part,
        path_count: n,
    })
}

/// Window weights for the conditioning pair `(s, t) = (t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub step: usize,
    pub s: f64,
    pub t: f64,
    /// Two-window weight `Π = 𝒢 − Π₁^α/(s𝔄)`.
    pub pi: Vec<f64>,
    /// `Π₁^α = U_k / Y_k`.
    pub pi1_alpha: Vec<f64>,
    /// `𝒢_{s,t}`.
    pub correction: Vec<f64>,
    /// `Π₂^α`, present when requested.
    pub pi2_alpha: Option<Vec<f64>>,
    /// Mean absolute compensator increment over the window.
    pub compensator_magnitude: f64,
    /// Mean absolute jump-sum increment over the window.
    pub jump_magnitude: f64,
}

impl WeightSet {
    /// `Π₁ = Π₁^α / (s 𝔄)`.
    pub fn pi1(&self, mass_a: f64) -> Vec<f64> {
        self.pi1_alpha.iter().map(|p| p / (self.s * mass_a)).collect()
    }
}

/// Builds the window weights at step `k` (`1 ≤ k ≤ N−1`).
pub fn weights_for_window(
    bundle: &PathBundle,
    asset_index: usize,
    acc: &WeightAccumulator,
    k: usize,
    mass_a: f64,
    with_pi2: bool,
) -> Result<WeightSet> {
    let steps = bundle.grid.steps;
    if k == 0 || k >= steps {
        return Err(Error::InvalidInput(format!(
            "window step must satisfy 1 <= k <= N-1, got k={k}, N={steps}"
        )));
    }
    let paths = &bundle.assets[asset_index];
    let n = bundle.path_count();
    let s = bundle.grid.time(k);
    let t = bundle.grid.time(k + 1);
    let mut pi = Vec::with_capacity(n);
    let mut pi1_alpha = Vec::with_capacity(n);
    let mut correction = Vec::with_capacity(n);
    let mut comp_mag = 0.0;
    let mut jump_mag = 0.0;
    for m in 0..n {
        let y = paths.variation(k, m);
        if !(y.abs() >= MIN_VARIATION) {
            return Err(Error::DegenerateVariation {
                path: m,
                t: s,
                factor: y,
            });
        }
        let u_s = acc.value(k, m);
        let u_t = acc.value(k + 1, m);
        let p1 = u_s / y;
        // without jumps U ≡ 0 and 𝔄 = 0; the weight is zero
        let (g, full) = if mass_a == 0.0 {
            (0.0, 0.0)
        } else {
            let g = (u_t - u_s) / ((t - s) * mass_a * y);
            (g, g - p1 / (s * mass_a))
        };
        pi1_alpha.push(p1);
        correction.push(g);
        pi.push(full);
        let i0 = k * n + m;
        let i1 = (k + 1) * n + m;
        comp_mag += (acc.compensator_part[i1] - acc.compensator_part[i0]).abs();
        jump_mag += (acc.jump_part[i1] - acc.jump_part[i0]).abs();
    }
    let pi2_alpha = with_pi2.then(|| {
        (0..n)
            .map(|m| {
                let mass: f64 = paths.jumps[m]
                    .iter()
                    .filter(|e| e.step < k)
                    .map(|e| (e.mark * e.mark).min(1.0))
                    .sum();
                paths.variation(k + 1, m) / paths.variation(k, m) * mass
            })
            .collect()
    });
    Ok(WeightSet {
        step: k,
        s,
        t,
        pi,
        pi1_alpha,
        correction,
        pi2_alpha,
        compensator_magnitude: comp_mag / n as f64,
        jump_magnitude: jump_mag / n as f64,
    })
}

/// Accumulators and mass constants for every asset of a bundle.
#[derive(Debug, Clone)]
pub struct WeightEngine {
    pub accumulators: Vec<WeightAccumulator>,
    pub mass_a: Vec<f64>,
}

impl WeightEngine {
    pub fn build(bundle: &PathBundle, assets: &[AssetModel]) -> Result<Self> {
        let mut accumulators = Vec::with_capacity(assets.len());
        let mut mass_a = Vec::with_capacity(assets.len());
        for (i, asset) in assets.iter().enumerate() {
            let quad = ZQuadrature::for_measure(&asset.levy);
            accumulators.push(accumulate_weights(bundle, i, asset, &quad)?);
            mass_a.push(asset.levy.mass_a()?);
        }
        Ok(Self { accumulators, mass_a })
    }

    pub fn window(&self, bundle: &PathBundle, asset: usize, k: usize) -> Result<WeightSet> {
        weights_for_window(bundle, asset, &self.accumulators[asset], k, self.mass_a[asset], false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasureSpec;
    use crate::model::{CoefficientSpec, JumpCoefficientSpec, MeanFunctional, ModelSpec};
    use crate::paths::{simulate_ensemble, Simulator, TimeGrid};

    fn affine_in_z_asset(lam: f64) -> AssetModel {
        AssetModel {
            x0: 1.0,
            drift: CoefficientSpec::affine(0.5, 0.5, 0.0),
            diffusion: CoefficientSpec::affine(0.2, 0.0, 0.0),
            jump: JumpCoefficientSpec::AffineInZ {
                lambda0: CoefficientSpec::constant(1.0),
                lam,
            },
            levy: LevyMeasureSpec::UniformSymmetric {
                half_width: 0.5,
                rate: 1.0,
            },
            mean_functional: MeanFunctional::Identity,
        }
    }

    #[test]
    fn kernel_for_affine_in_z_uniform() {
        // 2z(1+λ)/λ₀ with λ₀=1
        let a = affine_in_z_asset(0.0);
        let z = 0.49;
        assert!((kernel_j(&a, 0.3, 2.0, z, 1.0).unwrap() - 2.0 * z).abs() < 1e-15);
        let a = affine_in_z_asset(0.1);
        assert!((kernel_j(&a, 0.3, 2.0, -z, 1.0).unwrap() + 2.0 * z * 1.1).abs() < 1e-15);
    }

    #[test]
    fn kernel_at_half_on_wider_support() {
        let mut a = affine_in_z_asset(0.0);
        a.levy = LevyMeasureSpec::UniformSymmetric {
            half_width: 0.75,
            rate: 1.0,
        };
        assert!((kernel_j(&a, 0.0, 1.0, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_for_pure_amplitude_kou() {
        let a = AssetModel {
            x0: 10.0,
            drift: CoefficientSpec::affine(0.0, 1.0, 0.0),
            diffusion: CoefficientSpec::affine(0.5, 0.0, 0.0),
            jump: JumpCoefficientSpec::PureAmplitude,
            levy: LevyMeasureSpec::Kou {
                rate: 10.0,
                p: 0.6,
                eta1: 10.0,
                eta2: 5.0,
            },
            mean_functional: MeanFunctional::Identity,
        };
        // w = z/2, so 𝒥 = ½ + (z/2)(−η₁) = 0.5 − 1
        let v = kernel_j(&a, 0.0, 10.0, 0.2, 10.0).unwrap();
        assert!((v - (-0.5)).abs() < 1e-14, "{v}");
    }

    #[test]
    fn kernel_outside_support_is_rejected() {
        assert!(kernel_j(&affine_in_z_asset(0.0), 0.0, 1.0, 0.7, 1.0).is_err());
    }

    // ∂_z(κ w)/κ by central differences, w = (1∧z²)(1+M)/∂_zλ.
    fn divergence_fd(a: &AssetModel, x: f64, z: f64, m: f64) -> f64 {
        let kw = |z: f64| {
            let j = a.eval_jump(0.0, x, z, m).unwrap();
            a.levy.density(z) * (z * z).min(1.0) * (1.0 + j.dx) / j.dz
        };
        let h = 1e-6;
        (kw(z + h) - kw(z - h)) / (2.0 * h) / a.levy.density(z)
    }

    #[test]
    fn kernel_is_the_divergence_of_the_direction() {
        let linear = AssetModel {
            x0: 1.0,
            drift: CoefficientSpec::affine(1.0, 1.0, 0.0),
            diffusion: CoefficientSpec::affine(0.5, 0.0, 0.0),
            jump: JumpCoefficientSpec::LinearMeanField { c: 0.2 },
            levy: LevyMeasureSpec::UniformSymmetric {
                half_width: 0.5,
                rate: 10.0,
            },
            mean_functional: MeanFunctional::Identity,
        };
        let kou = AssetModel {
            jump: JumpCoefficientSpec::PureAmplitude,
            levy: LevyMeasureSpec::Kou {
                rate: 10.0,
                p: 0.6,
                eta1: 10.0,
                eta2: 5.0,
            },
            ..linear.clone()
        };
        for a in [&linear, &kou, &affine_in_z_asset(0.3)] {
            for z in [-0.45, -0.2, -0.03, 0.07, 0.3, 0.44] {
                let v = kernel_j(a, 0.0, 1.3, z, 0.8).unwrap();
                let fd = divergence_fd(a, 1.3, z, 0.8);
                assert!((v - fd).abs() < 1e-6 * fd.abs().max(1.0), "z={z}: {v} vs {fd}");
            }
        }
        for z in [-2.5, -1.2, 1.4, 3.0] {
            let v = kernel_j(&kou, 0.0, 1.3, z, 0.8).unwrap();
            let fd = divergence_fd(&kou, 1.3, z, 0.8);
            assert!((v - fd).abs() < 1e-6 * fd.abs().max(1.0), "z={z}: {v} vs {fd}");
        }
    }

    fn affine_in_z_bundle(lam: f64, rate: f64, paths: usize, seed: u64) -> (ModelSpec, PathBundle) {
        let mut a = affine_in_z_asset(lam);
        a.levy = a.levy.with_rate(rate);
        let model = ModelSpec::single(a);
        let bundle = simulate_ensemble(&model, TimeGrid::new(16, 1.0).unwrap(), paths, seed).unwrap();
        (model, bundle)
    }

    fn accumulate(model: &ModelSpec, bundle: &PathBundle) -> WeightAccumulator {
        let a = &model.assets[0];
        accumulate_weights(bundle, 0, a, &ZQuadrature::for_measure(&a.levy)).unwrap()
    }

    #[test]
    fn zero_rate_gives_zero_weights() {
        let (model, bundle) = affine_in_z_bundle(0.2, 0.0, 50, 1);
        let acc = accumulate(&model, &bundle);
        let mass = model.assets[0].levy.mass_a().unwrap();
        assert_eq!(mass, 0.0);
        let w = weights_for_window(&bundle, 0, &acc, 5, mass, true).unwrap();
        assert!(w.pi.iter().all(|&p| p == 0.0));
        assert!(w.pi1_alpha.iter().all(|&p| p == 0.0));
        assert!(w.pi2_alpha.unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn pi2_vanishes_without_early_jumps() {
        let (model, bundle) = affine_in_z_bundle(0.2, 2.0, 200, 3);
        let acc = accumulate(&model, &bundle);
        let k = 4;
        let w = weights_for_window(&bundle, 0, &acc, k, 1.0 / 12.0, true).unwrap();
        let pi2 = w.pi2_alpha.unwrap();
        let mut quiet = 0;
        for (jumps, p) in bundle.assets[0].jumps.iter().zip(&pi2) {
            if jumps.iter().all(|e| e.step >= k) {
                assert_eq!(*p, 0.0);
                quiet += 1;
            }
        }
        assert!(quiet > 0);
    }

    #[test]
    fn window_step_range_is_checked() {
        let (model, bundle) = affine_in_z_bundle(0.2, 1.0, 10, 3);
        let acc = accumulate(&model, &bundle);
        assert!(weights_for_window(&bundle, 0, &acc, 0, 1.0, false).is_err());
        assert!(weights_for_window(&bundle, 0, &acc, 16, 1.0, false).is_err());
    }

    // Hand-specialised weight for λ = λ₀z + λx with constant λ₀ and
    // uniform κ on (−h, h): integrand 2z(1+λ)/λ₀, odd, so no compensator.
    fn hand_pi(bundle: &PathBundle, lam: f64, rate: f64, k: usize, m: usize) -> f64 {
        let (l0, h) = (1.0_f64, 0.5_f64);
        let p = &bundle.assets[0];
        let dt = bundle.grid.dt();
        let comp = 0.0;
        let integral = |from: usize, to: usize| {
            let jumps: f64 = p.jumps[m]
                .iter()
                .filter(|e| e.step >= from && e.step < to)
                .map(|e| e.pre_variation * 2.0 * e.mark * (1.0 + lam) / l0)
                .sum();
            let c: f64 = (from..to).map(|j| p.variation(j, m) * comp * dt).sum();
            jumps - c
        };
        let mass = 2.0 * rate * h.powi(3) / 3.0;
        let (s, t) = (bundle.grid.time(k), bundle.grid.time(k + 1));
        let ys = p.variation(k, m);
        integral(k, k + 1) / ((t - s) * mass * ys) - integral(0, k) / (s * mass * ys)
    }

    #[test]
    fn generic_pipeline_matches_hand_specialised_weight() {
        let (lam, rate) = (0.3, 3.0);
        let (model, bundle) = affine_in_z_bundle(lam, rate, 400, 11);
        let acc = accumulate(&model, &bundle);
        let mass = model.assets[0].levy.mass_a().unwrap();
        assert!((mass - rate / 12.0).abs() < 1e-12);
        for k in [1, 7, 15] {
            let w = weights_for_window(&bundle, 0, &acc, k, mass, false).unwrap();
            for m in 0..400 {
                let h = hand_pi(&bundle, lam, rate, k, m);
                assert!((w.pi[m] - h).abs() <= 1e-8 * h.abs().max(1.0), "k={k} m={m}");
            }
        }
    }

    #[test]
    fn accumulator_telescopes_to_the_full_integral() {
        let (model, bundle) = affine_in_z_bundle(0.3, 3.0, 100, 5);
        let a = &model.assets[0];
        let quad = ZQuadrature::for_measure(&a.levy);
        let acc = accumulate(&model, &bundle);
        let p = &bundle.assets[0];
        let n = bundle.grid.steps;
        let dt = bundle.grid.dt();
        for m in 0..100 {
            let jumps: f64 = p.jumps[m]
                .iter()
                .map(|e| e.pre_variation * kernel_j(a, e.time, e.pre_state, e.mark, p.mean_stats[e.step]).unwrap())
                .sum();
            let comp: f64 = (0..n)
                .map(|k| {
                    let (t, x) = (bundle.grid.time(k), p.state(k, m));
                    dt * p.variation(k, m) * quad.integrate(|z| kernel_j(a, t, x, z, p.mean_stats[k]).unwrap())
                })
                .sum();
            let direct = jumps - comp;
            let scale = jumps.abs() + comp.abs();
            assert!((acc.value(n, m) - direct).abs() <= 1e-12 * scale.max(1e-300));
            assert_eq!(acc.value(0, m), 0.0);
        }
    }

    #[test]
    fn weights_are_adapted() {
        let mut a = affine_in_z_asset(0.3);
        a.levy = a.levy.with_rate(3.0);
        let model = ModelSpec::single(a);
        let grid = TimeGrid::new(16, 1.0).unwrap();
        let k = 6;
        let run = |tail_seed: u64| {
            let mut sim = Simulator::new(&model, grid, 60, 21).unwrap();
            for _ in 0..k {
                sim.step().unwrap();
            }
            sim.reseed(tail_seed);
            let bundle = sim.finish().unwrap();
            let acc = accumulate(&model, &bundle);
            weights_for_window(&bundle, 0, &acc, k, 0.1, false).unwrap().pi1_alpha
        };
        assert_eq!(run(1), run(2));
    }

    #[test]
    fn weight_is_mean_zero_when_variation_ignores_jumps() {
        let (model, bundle) = affine_in_z_bundle(0.0, 3.0, 10_000, 8);
        let acc = accumulate(&model, &bundle);
        let mass = model.assets[0].levy.mass_a().unwrap();
        let w = weights_for_window(&bundle, 0, &acc, 8, mass, false).unwrap();
        let n = w.pi.len() as f64;
        let mean = w.pi.iter().sum::<f64>() / n;
        let var = w.pi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(
            mean.abs() <= 3.0 * (var / n).sqrt(),
            "mean {mean} se {}",
            (var / n).sqrt()
        );
    }
}
