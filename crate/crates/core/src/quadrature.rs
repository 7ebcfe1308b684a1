//! Quadrature rules over the jump-mark space.
//!
//! [`ZQuadrature`] is a fixed Gauss–Legendre rule with the Lévy density folded
//! into its weights, so `Σ wᵢ g(zᵢ) ≈ ∫ g(z) κ(z) dz`. It evaluates every
//! compensator integral in the path engine, the weight accumulator and the
//! finite-difference benchmark. [`adaptive_simpson`] backs the one-off
//! integrals (mass constants, localizer normalization checks).

use crate::error::{Error, Result};
use crate::levy::LevyMeasureSpec;

/// Default node count per Gauss–Legendre panel.
pub const DEFAULT_NODES: usize = 64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| half * v).collect(),
    )
}

/// Adaptive Simpson integration to a relative tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Seed the absolute target from a coarse composite estimate.
    let coarse = composite_simpson(&f, a, b, 64).abs();
    let tol = (rel_tol * coarse).max(f64::MIN_POSITIVE);
    let mut evals = 0usize;
    let v = simpson_step(&f, a, b, fa, fm, fb, whole, tol, 60, &mut evals)?;
    if !v.is_finite() {
        return Err(Error::NumericalIntegration(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    Ok(v)
}

fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        s += h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if *evals > 5_000_000 {
        return Err(Error::NumericalIntegration(
            "adaptive Simpson exceeded its evaluation budget".into(),
        ));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::NumericalIntegration(format!(
            "adaptive Simpson did not converge near [{a}, {b}]"
        )));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?)
}

/// Fixed rule for `∫ g(z) κ(z) dz` over the support of a Lévy measure.
///
/// Nodes lie strictly inside the support and never at `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZQuadrature {
    pub nodes: Vec<f64>,
    /// Quadrature weight times density, `wᵢ κ(zᵢ)`.
    pub weights: Vec<f64>,
}

impl ZQuadrature {
    pub fn new(measure: &LevyMeasureSpec, node_count: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (a, b) in measure.quadrature_panels() {
            let (z, w) = gauss_legendre_on(node_count, a, b);
            for (zi, wi) in z.into_iter().zip(w) {
                let k = measure.density(zi);
                if k > 0.0 {
                    nodes.push(zi);
                    weights.push(wi * k);
                }
            }
        }
        Self { nodes, weights }
    }

    pub fn for_measure(measure: &LevyMeasureSpec) -> Self {
        Self::new(measure, DEFAULT_NODES)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ wᵢ g(zᵢ)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * g(z)).sum()
    }

    /// Like [`integrate`](Self::integrate) for fallible integrands.
    pub fn try_integrate<F: FnMut(f64) -> Result<f64>>(&self, mut g: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(z)?;
        }
        Ok(acc)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is the limit for 8 nodes
        let approx: f64 = x.iter().zip(&w).map(|(&t, &v)| v * t.powi(14)).sum();
        assert!((approx - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_64_nodes_symmetric_and_inside() {
        let (x, w) = gauss_legendre(64);
        for i in 0..64 {
            assert!(x[i].abs() < 1.0);
            assert!((x[i] + x[63 - i]).abs() < 1e-15);
            assert!(w[i] > 0.0);
        }
        let approx: f64 = x.iter().zip(&w).map(|(&t, &v)| v * t.cos()).sum();
        assert!((approx - 2.0 * 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn adaptive_simpson_matches_closed_forms() {
        let v = adaptive_simpson(|x: f64| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
        let v = adaptive_simpson(|x: f64| x * x, -0.5, 0.5, 1e-12).unwrap();
        assert!((v - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_simpson_reports_non_finite() {
        assert!(adaptive_simpson(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
