#![allow(dead_code)]

use std::io::Write;

use mfmalliavin::config::RunConfig;
use mfmalliavin::levy::LevyMeasureSpec;
use mfmalliavin::model::{AssetModel, CoefficientSpec};

pub fn shipped(name: &str) -> RunConfig {
    RunConfig::shipped(name).expect("shipped config")
}

pub fn asset(name: &str) -> AssetModel {
    shipped(name).assets[0].clone()
}

/// The asset with its jump intensity set to zero.
pub fn without_jumps(mut a: AssetModel) -> AssetModel {
    a.levy = a.levy.with_rate(0.0);
    a
}

/// Writes past the test harness capture so lines reach the console.
pub fn report(id: &str, pass: bool, detail: impl AsRef<str>) {
    let line = format!(
        "[{}] criterion {id}: {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Weighted average `Σ w F / Σ w` with its delta-method standard error.
pub fn ratio_with_se(w: &[f64], f: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let r = w.iter().zip(f).map(|(w, f)| w * f).sum::<f64>() / sw;
    let var = w.iter().zip(f).map(|(w, f)| (w * (f - r)).powi(2)).sum::<f64>() / (sw * sw);
    (r, var.sqrt())
}

/// Nadaraya–Watson regression of `f` on `g` at `alpha` with a Gaussian
/// kernel of bandwidth `h`.
pub fn nadaraya_watson(g: &[f64], f: &[f64], alpha: f64, h: f64) -> (f64, f64) {
    let w: Vec<f64> = g.iter().map(|x| (-0.5 * ((x - alpha) / h).powi(2)).exp()).collect();
    ratio_with_se(&w, f)
}

/// Silverman's rule-of-thumb bandwidth.
pub fn silverman(g: &[f64]) -> f64 {
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let sd = (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = g.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = s[(3 * s.len()) / 4] - s[s.len() / 4];
    0.9 * sd.min(iqr / 1.34) * n.powf(-0.2)
}

/// American (or European) put under `dX = a·m(t) dt + b·X dW`,
/// `m(t) = x₀ e^{at}`, on a binomial tree in `y = ln(x)/b`.
#[allow(clippy::too_many_arguments)]
pub fn binomial_put(
    a: f64,
    b: f64,
    x0: f64,
    strike: f64,
    rate: f64,
    horizon: f64,
    steps: usize,
    american: bool,
) -> f64 {
    let dt = horizon / steps as f64;
    let sq = dt.sqrt();
    let disc = (-rate * dt).exp();
    let y0 = x0.ln() / b;
    let x_at = |k: usize, j: usize| (b * (y0 + (2.0 * j as f64 - k as f64) * sq)).exp();
    let mut v: Vec<f64> = (0..=steps).map(|j| (strike - x_at(steps, j)).max(0.0)).collect();
    for k in (0..steps).rev() {
        let m = x0 * (a * k as f64 * dt).exp();
        for j in 0..=k {
            let x = x_at(k, j);
            let mu = a * m / (b * x) - 0.5 * b;
            let p = (0.5 + 0.5 * mu * sq).clamp(0.0, 1.0);
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            v[j] = if american { cont.max(strike - x) } else { cont };
        }
    }
    v[0]
}

/// Drift coefficient on the mean for an `affine(0, a, 0)` drift.
pub fn mean_drift(asset: &AssetModel) -> f64 {
    match &asset.drift {
        CoefficientSpec::Affine { state, mean, constant } if *state == 0.0 && *constant == 0.0 => *mean,
        other => panic!("expected a pure mean drift, got {other:?}"),
    }
}

pub fn vol(asset: &AssetModel) -> f64 {
    match &asset.diffusion {
        CoefficientSpec::Affine { state, mean, constant } if *mean == 0.0 && *constant == 0.0 => *state,
        other => panic!("expected a proportional diffusion, got {other:?}"),
    }
}

pub fn is_kou(asset: &AssetModel) -> bool {
    matches!(asset.levy, LevyMeasureSpec::Kou { .. })
}
