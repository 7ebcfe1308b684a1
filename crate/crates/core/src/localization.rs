//! Localizing densities `ψ`, their cumulatives `Ψ`, and the data-driven
//! parameter `λ̂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA_MIN: f64 = 1e-6;
pub const DEFAULT_LAMBDA_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Localizer {
    /// `ψ(x) = λ/2·e^{−λ|x|}`
    Laplace {
        lambda: f64,
    },
    /// `ψ(x) = λe^{−λx}` on `x ≥ 0`
    OneSidedExp {
        lambda: f64,
    },
    None,
}

impl Localizer {
    /// `(ψ(x), Ψ(x))`
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            Localizer::Laplace { lambda } => {
                let e = (-lambda * x.abs()).exp();
                let cdf = if x < 0.0 { 0.5 * e } else { 1.0 - 0.5 * e };
                (0.5 * lambda * e, cdf)
            }
            Localizer::OneSidedExp { lambda } => {
                if x < 0.0 {
                    (0.0, 0.0)
                } else {
                    let e = (-lambda * x).exp();
                    (lambda * e, 1.0 - e)
                }
            }
            Localizer::None => (0.0, 0.0),
        }
    }

    pub fn kind(&self) -> LocalizerKind {
        match self {
            Localizer::Laplace { .. } => LocalizerKind::Laplace,
            Localizer::OneSidedExp { .. } => LocalizerKind::OneSided,
            Localizer::None => LocalizerKind::None,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Localizer::Laplace { lambda } | Localizer::OneSidedExp { lambda } => Some(lambda),
            Localizer::None => None,
        }
    }
}

/// `ℋ(x) = 𝟙{x ≥ 0} + c`
#[inline]
pub fn heaviside(x: f64, c: f64) -> f64 {
    if x >= 0.0 {
        1.0 + c
    } else {
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LocalizerKind {
    None,
    Laplace,
    #[default]
    #[serde(rename = "onesided", alias = "one_sided", alias = "one_sided_exp")]
    OneSided,
}

impl LocalizerKind {
    pub fn with_lambda(self, lambda: f64) -> Localizer {
        match self {
            LocalizerKind::None => Localizer::None,
            LocalizerKind::Laplace => Localizer::Laplace { lambda },
            LocalizerKind::OneSided => Localizer::OneSidedExp { lambda },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LocalizerKind::None => "none",
            LocalizerKind::Laplace => "laplace",
            LocalizerKind::OneSided => "onesided",
        }
    }
}

impl std::str::FromStr for LocalizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(LocalizerKind::None),
            "laplace" => Ok(LocalizerKind::Laplace),
            "onesided" | "one_sided" | "one-sided" | "onesidedexp" => Ok(LocalizerKind::OneSided),
            other => Err(Error::InvalidInput(format!("unknown localizer `{other}`"))),
        }
    }
}

/// How the pricer picks a localizer at each backward step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizerPolicy {
    pub kind: LocalizerKind,
    /// Skip estimation and use this λ at every step.
    pub fixed_lambda: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for LocalizerPolicy {
    fn default() -> Self {
        Self {
            kind: LocalizerKind::OneSided,
            fixed_lambda: None,
            lambda_min: DEFAULT_LAMBDA_MIN,
            lambda_max: DEFAULT_LAMBDA_MAX,
        }
    }
}

impl LocalizerPolicy {
    pub fn none() -> Self {
        Self {
            kind: LocalizerKind::None,
            ..Self::default()
        }
    }

    pub fn of_kind(kind: LocalizerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min <= self.lambda_max && self.lambda_max.is_finite()) {
            return Err(Error::Config(format!(
                "localizer clamp bounds must satisfy 0 < min <= max < inf, got [{}, {}]",
                self.lambda_min, self.lambda_max
            )));
        }
        if let Some(l) = self.fixed_lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("fixed lambda must be positive, got {l}")));
            }
        }
        Ok(())
    }

    /// Resolves the localizer for one step. Degenerate inputs fall back to
    /// [`Localizer::None`].
    pub fn resolve(&self, values_sq: &[f64], weights: &[f64]) -> Localizer {
        if self.kind == LocalizerKind::None {
            return Localizer::None;
        }
        if let Some(l) = self.fixed_lambda {
            return self.kind.with_lambda(l);
        }
        match estimate_lambda_clamped(values_sq, weights, self.lambda_min, self.lambda_max) {
            Ok(l) => self.kind.with_lambda(l),
            Err(_) => Localizer::None,
        }
    }
}

/// `λ̂ = (Σ f² Π² / Σ f²)^{1/2}`, clamped to `[1e−6, 1e6]`.
pub fn estimate_lambda(values_sq: &[f64], weights: &[f64]) -> Result<f64> {
    estimate_lambda_clamped(values_sq, weights, DEFAULT_LAMBDA_MIN, DEFAULT_LAMBDA_MAX)
}

pub fn estimate_lambda_clamped(values_sq: &[f64], weights: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if values_sq.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values_sq.len(),
            got: weights.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&v, &w) in values_sq.iter().zip(weights) {
        num += v * w * w;
        den += v;
    }
    if !(den > 0.0) {
        return Err(Error::LocalizationDegenerate);
    }
    let l = (num / den).sqrt();
    if !l.is_finite() {
        return Err(Error::LocalizationDegenerate);
    }
    Ok(l.clamp(lo, hi))
}

/// Result of the coupled `λ*_j` iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLambda {
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Max relative residual of the fixed-point equations at the returned iterate.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixedPointScheme {
    #[default]
    Jacobi,
    GaussSeidel,
}

pub const MULTI_LAMBDA_TOL: f64 = 1e-8;
pub const MULTI_LAMBDA_MAX_ITER: usize = 200;

fn multi_update(values_sq: &[f64], weights: &[Vec<f64>], lambdas: &[f64], j: usize, lo: f64, hi: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (m, &v) in values_sq.iter().enumerate() {
        let mut prod = v;
        for (i, w) in weights.iter().enumerate() {
            if i != j {
                prod *= lambdas[i] * lambdas[i] + w[m] * w[m];
            }
        }
        num += prod * weights[j][m] * weights[j][m];
        den += prod;
    }
    if !(den > 0.0) {
        return lo;
    }
    (num / den).sqrt().clamp(lo, hi)
}

fn multi_residual(values_sq: &[f64], weights: &[Vec<f64>], lambdas: &[f64], lo: f64, hi: f64) -> f64 {
    (0..weights.len())
        .map(|j| {
            let target = multi_update(values_sq, weights, lambdas, j, lo, hi);
            ((target - lambdas[j]) / lambdas[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Exact solution of the two-asset system. With `A_j = E f²Π_j²`,
/// `B = E f²Π_1²Π_2²`, `C = E f²` the equations read
/// `u = (A_1 v + B)/(C v + A_2)`, `v = (A_2 u + B)/(C u + A_1)`, whence
/// `A_2 u = A_1 v` and `u² = B A_1 / (C A_2)`.
fn two_asset_closed_form(values_sq: &[f64], weights: &[Vec<f64>]) -> Option<[f64; 2]> {
    let (mut a1, mut a2, mut b, mut c) = (0.0, 0.0, 0.0, 0.0);
    for (m, &v) in values_sq.iter().enumerate() {
        let (p1, p2) = (weights[0][m] * weights[0][m], weights[1][m] * weights[1][m]);
        a1 += v * p1;
        a2 += v * p2;
        b += v * p1 * p2;
        c += v;
    }
    let u = (b * a1 / (c * a2)).sqrt();
    let w = (b * a2 / (c * a1)).sqrt();
    let ok = |x: f64| x.is_finite() && x > 0.0;
    (ok(u) && ok(w)).then(|| [u.sqrt(), w.sqrt()])
}

/// Solves `λ_j² = E(f²Π_j²∏_{i≠j}[λ_i²+Π_i²]) / E(f²∏_{i≠j}[λ_i²+Π_i²])`
/// by fixed-point iteration. Two assets start from the exact solution,
/// otherwise from the single-asset estimates.
pub fn solve_lambda_multi(values_sq: &[f64], weights: &[Vec<f64>]) -> Result<MultiLambda> {
    solve_lambda_multi_with(
        values_sq,
        weights,
        FixedPointScheme::Jacobi,
        DEFAULT_LAMBDA_MIN,
        DEFAULT_LAMBDA_MAX,
    )
}

pub fn solve_lambda_multi_with(
    values_sq: &[f64],
    weights: &[Vec<f64>],
    scheme: FixedPointScheme,
    lo: f64,
    hi: f64,
) -> Result<MultiLambda> {
    if weights.len() < 2 {
        return Err(Error::InvalidInput("coupled lambda needs at least two assets".into()));
    }
    for w in weights {
        if w.len() != values_sq.len() {
            return Err(Error::DimensionMismatch {
                expected: values_sq.len(),
                got: w.len(),
            });
        }
    }
    let mut lambdas = weights
        .iter()
        .map(|w| estimate_lambda_clamped(values_sq, w, lo, hi))
        .collect::<Result<Vec<_>>>()?;
    let d = weights.len();
    if d == 2 {
        if let Some(exact) = two_asset_closed_form(values_sq, weights) {
            lambdas = exact.iter().map(|l| l.clamp(lo, hi)).collect();
        }
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MULTI_LAMBDA_MAX_ITER {
        iterations += 1;
        let mut next = lambdas.clone();
        for j in 0..d {
            let src = match scheme {
                FixedPointScheme::Jacobi => &lambdas,
                FixedPointScheme::GaussSeidel => &next,
            };
            next[j] = multi_update(values_sq, weights, src, j, lo, hi);
        }
        let change = next
            .iter()
            .zip(&lambdas)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        lambdas = next;
        if change < MULTI_LAMBDA_TOL {
            converged = true;
            break;
        }
    }
    let residual = multi_residual(values_sq, weights, &lambdas, lo, hi);
    Ok(MultiLambda {
        lambdas,
        iterations,
        converged,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_on;
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        let (psi, cdf) = Localizer::Laplace { lambda: 2.0 }.eval(0.0);
        assert_eq!((psi, cdf), (1.0, 0.5));
        assert_eq!(Localizer::OneSidedExp { lambda: 3.0 }.eval(-1.0), (0.0, 0.0));
        let (psi, cdf) = Localizer::Laplace { lambda: 1.0 }.eval(2f64.ln());
        assert!((psi - 0.25).abs() < 1e-15 && (cdf - 0.75).abs() < 1e-15);
        assert_eq!(Localizer::None.eval(0.3), (0.0, 0.0));
    }

    #[test]
    fn densities_integrate_to_one() {
        for loc in [
            Localizer::Laplace { lambda: 1.7 },
            Localizer::OneSidedExp { lambda: 0.8 },
        ] {
            let lam = loc.lambda().unwrap();
            let mut total = 0.0;
            for k in -60..60 {
                let (a, b) = (k as f64 / lam, (k + 1) as f64 / lam);
                let (x, w) = gauss_legendre_on(32, a, b);
                total += x.iter().zip(&w).map(|(x, w)| w * loc.eval(*x).0).sum::<f64>();
            }
            assert!((total - 1.0).abs() < 1e-10, "{loc:?}: {total}");
        }
    }

    #[test]
    fn lambda_examples() {
        assert!((estimate_lambda(&[1.0, 1.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        let w = [1.0, -2.0, 0.5, 3.0];
        let rms = (w.iter().map(|x| x * x).sum::<f64>() / 4.0).sqrt();
        assert!((estimate_lambda(&[1.0; 4], &w).unwrap() - rms).abs() < 1e-15);
        assert_eq!(
            estimate_lambda(&[0.0, 0.0], &[1.0, 2.0]),
            Err(Error::LocalizationDegenerate)
        );
        assert_eq!(estimate_lambda(&[1.0], &[0.0]).unwrap(), DEFAULT_LAMBDA_MIN);
    }

    #[test]
    fn policy_falls_back_on_degenerate_values() {
        let p = LocalizerPolicy::default();
        assert_eq!(p.resolve(&[0.0, 0.0], &[1.0, 1.0]), Localizer::None);
        assert_eq!(
            LocalizerPolicy {
                fixed_lambda: Some(2.0),
                ..p
            }
            .resolve(&[0.0], &[0.0]),
            Localizer::OneSidedExp { lambda: 2.0 }
        );
    }

    #[test]
    fn decoupled_second_asset_hits_the_floor() {
        let v = [1.0, 4.0, 0.5, 2.0];
        let w1 = vec![1.0, -0.5, 2.0, 0.3];
        let w2 = vec![0.0; 4];
        let sol = solve_lambda_multi(&v, &[w1.clone(), w2]).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.lambdas[1], DEFAULT_LAMBDA_MIN);
        let single = estimate_lambda(&v, &w1).unwrap();
        assert!((sol.lambdas[0] - single).abs() <= 1e-8 * single);
    }

    #[test]
    fn swapping_assets_swaps_lambdas() {
        let v = [1.0, 2.0, 0.7, 1.3, 0.2];
        let w1 = vec![0.4, -1.0, 2.0, 0.1, -0.6];
        let w2 = vec![1.5, 0.2, -0.3, 0.8, 1.1];
        let a = solve_lambda_multi(&v, &[w1.clone(), w2.clone()]).unwrap();
        let b = solve_lambda_multi(&v, &[w2, w1]).unwrap();
        assert_eq!(a.lambdas[0], b.lambdas[1]);
        assert_eq!(a.lambdas[1], b.lambdas[0]);
    }

    #[test]
    fn gauss_seidel_reaches_the_same_point() {
        let v = [1.0, 2.0, 0.7, 1.3, 0.2];
        let w1 = vec![0.4, -1.0, 2.0, 0.1, -0.6];
        let w2 = vec![1.5, 0.2, -0.3, 0.8, 1.1];
        let ws = [w1, w2];
        let j = solve_lambda_multi(&v, &ws).unwrap();
        let g = solve_lambda_multi_with(&v, &ws, FixedPointScheme::GaussSeidel, 1e-6, 1e6).unwrap();
        assert!(j.converged && g.converged);
        for (a, b) in j.lambdas.iter().zip(&g.lambdas) {
            assert!((a - b).abs() < 1e-6 * a);
        }
        assert!(j.residual < 1e-8 && g.residual < 1e-8);
    }

    #[test]
    fn two_asset_closed_form_is_a_fixed_point() {
        let v = [1.0, 2.0, 0.7, 1.3, 0.2, 3.1];
        let ws = [
            vec![0.4, -1.0, 2.0, 0.1, -0.6, 9.0],
            vec![1.5, 0.2, -0.3, 0.8, 1.1, -12.0],
        ];
        let exact = two_asset_closed_form(&v, &ws).unwrap();
        for j in 0..2 {
            let next = multi_update(&v, &ws, &exact, j, 1e-6, 1e6);
            assert!((next - exact[j]).abs() <= 1e-13 * exact[j]);
        }
        let sol = solve_lambda_multi(&v, &ws).unwrap();
        assert!(sol.converged && sol.iterations <= 2 && sol.residual < 1e-12);
    }

    proptest! {
        #[test]
        fn lambda_is_scale_equivariant(
            pairs in prop::collection::vec((0.01f64..10.0, -5.0f64..5.0), 2..40),
            s in 0.1f64..10.0,
        ) {
            let v: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let w: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let ws: Vec<f64> = w.iter().map(|x| x * s).collect();
            let l = estimate_lambda(&v, &w).unwrap();
            let ls = estimate_lambda(&v, &ws).unwrap();
            prop_assume!(l > 1e-5);
            prop_assert!((ls - s * l).abs() <= 1e-12 * ls);
        }

        #[test]
        fn heaviside_minus_cdf_is_bounded(x in -50.0f64..50.0, lam in 0.01f64..20.0) {
            let (_, cdf) = Localizer::Laplace { lambda: lam }.eval(x);
            let gap = (heaviside(x, 0.0) - cdf).abs();
            prop_assert!(gap <= 0.5 * (-lam * x.abs()).exp() + 1e-15);
        }

        #[test]
        fn cdf_is_monotone(a in -20.0f64..20.0, b in -20.0f64..20.0, lam in 0.01f64..20.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for loc in [Localizer::Laplace { lambda: lam }, Localizer::OneSidedExp { lambda: lam }] {
                prop_assert!(loc.eval(lo).1 <= loc.eval(hi).1);
            }
        }
    }
}
