//! Localized ratio estimator of `E[f(X_t) | X_s = α]`.
//!
//! ```text
//!          Σ_l F_l (ψ(G_l−α) + Π_l[ℋ(G_l−α) − Ψ(G_l−α)])
//! ê(α) = ─────────────────────────────────────────────────
//!          Σ_l     (ψ(G_l−α) + Π_l[ℋ(G_l−α) − Ψ(G_l−α)])
//! ```
//!
//! [`estimate_naive`] evaluates this literally. [`estimate_all_sorted`]
//! evaluates it at every `α = G_m` at once: after sorting by `G`, every
//! term is a one-sided exponential in `G_l − α`, so the sums reduce to
//! decaying prefix and suffix scans over groups of tied `G` values.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::localization::{heaviside, Localizer};

/// Relative denominator threshold below which the estimate is discarded.
pub const DEFAULT_DEN_TOL: f64 = 1e-10;

/// Inputs over `M` paths.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorInput<'a> {
    /// Conditioning values `G_l = X_s^l`.
    pub g: &'a [f64],
    /// Target values `F_l`.
    pub f: &'a [f64],
    /// Weights `Π_l`.
    pub pi: &'a [f64],
    pub localizer: Localizer,
    /// Offset `c` in `ℋ(x) = 𝟙{x≥0} + c`.
    pub offset: f64,
}

impl<'a> EstimatorInput<'a> {
    pub fn new(g: &'a [f64], f: &'a [f64], pi: &'a [f64], localizer: Localizer) -> Self {
        Self {
            g,
            f,
            pi,
            localizer,
            offset: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.g.len();
        if m < 2 {
            return Err(Error::InvalidInput(format!("estimator needs M >= 2 paths, got {m}")));
        }
        for len in [self.f.len(), self.pi.len()] {
            if len != m {
                return Err(Error::DimensionMismatch { expected: m, got: len });
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(finite(self.g) && finite(self.f) && finite(self.pi) && self.offset.is_finite()) {
            return Err(Error::InvalidInput("estimator inputs must be finite".into()));
        }
        Ok(())
    }
}

/// Sample-mean numerator and denominator at one conditioning point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub numerator: f64,
    pub denominator: f64,
    /// Fallback threshold `tol·mean(ψ + |Π|)` in force at this point.
    pub threshold: f64,
    /// `None` when the denominator fell below the threshold.
    pub value: Option<f64>,
}

impl Estimate {
    /// From sample means of `(F − f_ref)·term` and `term`; the value is
    /// `f_ref + num/den`, which is exact for constant `F = f_ref`.
    fn centered(f_ref: f64, centered_num: f64, denominator: f64, threshold: f64) -> Self {
        let value = (denominator.abs() >= threshold && denominator != 0.0).then(|| f_ref + centered_num / denominator);
        Self {
            numerator: f_ref * denominator + centered_num,
            denominator,
            threshold,
            value,
        }
    }

    pub fn is_fallback(&self) -> bool {
        self.value.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    /// One estimate per path, in input order.
    pub estimates: Vec<Estimate>,
}

impl EstimatorOutput {
    pub fn fallback_count(&self) -> usize {
        self.estimates.iter().filter(|e| e.is_fallback()).count()
    }
}

fn term(loc: &Localizer, offset: f64, g: f64, alpha: f64, pi: f64) -> (f64, f64) {
    let x = g - alpha;
    let (psi, cdf) = loc.eval(x);
    (psi + pi * (heaviside(x, offset) - cdf), psi)
}

/// Direct `O(M)` evaluation at a single `α`.
pub fn estimate_naive(input: &EstimatorInput, alpha: f64, tol: f64) -> Result<Estimate> {
    input.validate()?;
    Ok(naive_unchecked(input, alpha, tol))
}

fn naive_unchecked(input: &EstimatorInput, alpha: f64, tol: f64) -> Estimate {
    let n = input.len() as f64;
    let f_ref = input.f[0];
    let mut num = 0.0;
    let mut den = 0.0;
    let mut scale = 0.0;
    for l in 0..input.len() {
        let (t, psi) = term(&input.localizer, input.offset, input.g[l], alpha, input.pi[l]);
        num += (input.f[l] - f_ref) * t;
        den += t;
        scale += psi + input.pi[l].abs();
    }
    Estimate::centered(f_ref, num / n, den / n, tol * scale / n)
}

/// Naive evaluation at every `α = G_m`; `O(M²)`.
pub fn estimate_all_naive(input: &EstimatorInput, tol: f64) -> Result<EstimatorOutput> {
    input.validate()?;
    let estimates = input
        .g
        .par_iter()
        .map(|&alpha| naive_unchecked(input, alpha, tol))
        .collect();
    Ok(EstimatorOutput { estimates })
}

struct Scan {
    /// `Σ_{G_l ≥ g_i} e^{−λ(G_l − g_i)} v_l` per group.
    suffix: Vec<f64>,
    /// `Σ_{G_l < g_i} e^{−λ(g_i − G_l)} v_l` per group.
    prefix: Vec<f64>,
}

fn scan(group_sums: &[f64], decay: &[f64]) -> Scan {
    let n = group_sums.len();
    let mut suffix = vec![0.0; n];
    let mut prefix = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc = group_sums[i] + if i + 1 < n { decay[i] * acc } else { 0.0 };
        suffix[i] = acc;
    }
    for i in 1..n {
        prefix[i] = decay[i - 1] * (prefix[i - 1] + group_sums[i - 1]);
    }
    Scan { suffix, prefix }
}

/// Evaluates the estimator at every `α = G_m` in `O(M log M)`.
pub fn estimate_all_sorted(input: &EstimatorInput, tol: f64) -> Result<EstimatorOutput> {
    input.validate()?;
    let m = input.len();
    let n = m as f64;
    let (g, pi) = (input.g, input.pi);
    let f_ref = input.f[0];
    let centered: Vec<f64> = input.f.iter().map(|v| v - f_ref).collect();
    let f = &centered;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));

    // groups of tied G in ascending order
    let mut starts = vec![0];
    for i in 1..m {
        if g[order[i]] != g[order[i - 1]] {
            starts.push(i);
        }
    }
    starts.push(m);
    let groups = starts.len() - 1;
    let values: Vec<f64> = (0..groups).map(|i| g[order[starts[i]]]).collect();

    let lambda = input.localizer.lambda().unwrap_or(0.0);
    let decay: Vec<f64> = values.windows(2).map(|w| (-lambda * (w[1] - w[0])).exp()).collect();

    let sums = |v: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..groups)
            .map(|i| order[starts[i]..starts[i + 1]].iter().map(|&l| v(l)).sum())
            .collect()
    };
    let s_f = scan(&sums(&|l| f[l]), &decay);
    let s_fpi = scan(&sums(&|l| f[l] * pi[l]), &decay);
    let s_one = scan(&sums(&|_| 1.0), &decay);
    let s_pi = scan(&sums(&|l| pi[l]), &decay);
    let total_fpi: f64 = order.iter().map(|&l| f[l] * pi[l]).sum();
    let total_pi: f64 = order.iter().map(|&l| pi[l]).sum();
    let abs_pi: f64 = order.iter().map(|&l| pi[l].abs()).sum();
    let c = input.offset;

    let per_group: Vec<Estimate> = (0..groups)
        .map(|i| {
            let (num, den, psi) = match input.localizer {
                Localizer::OneSidedExp { lambda } => (
                    lambda * s_f.suffix[i] + s_fpi.suffix[i],
                    lambda * s_one.suffix[i] + s_pi.suffix[i],
                    lambda * s_one.suffix[i],
                ),
                Localizer::Laplace { lambda } => (
                    0.5 * lambda * (s_f.suffix[i] + s_f.prefix[i]) + 0.5 * (s_fpi.suffix[i] - s_fpi.prefix[i]),
                    0.5 * lambda * (s_one.suffix[i] + s_one.prefix[i]) + 0.5 * (s_pi.suffix[i] - s_pi.prefix[i]),
                    0.5 * lambda * (s_one.suffix[i] + s_one.prefix[i]),
                ),
                Localizer::None => (s_fpi.suffix[i], s_pi.suffix[i], 0.0),
            };
            let num = num + c * total_fpi;
            let den = den + c * total_pi;
            Estimate::centered(f_ref, num / n, den / n, tol * (psi + abs_pi) / n)
        })
        .collect();

    let mut estimates = vec![per_group[0]; m];
    for i in 0..groups {
        for &l in &order[starts[i]..starts[i + 1]] {
            estimates[l] = per_group[i];
        }
    }
    Ok(EstimatorOutput { estimates })
}

/// Multi-asset inputs: one conditioning coordinate, weight and localizer per asset.
#[derive(Debug, Clone, Copy)]
pub struct ProductInput<'a> {
    pub g: &'a [Vec<f64>],
    pub f: &'a [f64],
    pub pi: &'a [Vec<f64>],
    pub localizers: &'a [Localizer],
    pub offset: f64,
}

impl ProductInput<'_> {
    pub fn validate(&self) -> Result<()> {
        let d = self.g.len();
        if d == 0 || self.pi.len() != d || self.localizers.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.pi.len().min(self.localizers.len()),
            });
        }
        let m = self.f.len();
        if m < 2 {
            return Err(Error::InvalidInput(format!("estimator needs M >= 2 paths, got {m}")));
        }
        for v in self.g.iter().chain(self.pi) {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput("estimator inputs must be finite".into()));
            }
        }
        if !self.f.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("estimator inputs must be finite".into()));
        }
        Ok(())
    }

    fn at(&self, alpha: &[f64], tol: f64) -> Estimate {
        let m = self.f.len();
        let f_ref = self.f[0];
        let mut num = 0.0;
        let mut den = 0.0;
        let mut scale = 0.0;
        for l in 0..m {
            let mut w = 1.0;
            let mut s = 1.0;
            for (i, loc) in self.localizers.iter().enumerate() {
                let (t, psi) = term(loc, self.offset, self.g[i][l], alpha[i], self.pi[i][l]);
                w *= t;
                s *= psi + self.pi[i][l].abs();
            }
            num += (self.f[l] - f_ref) * w;
            den += w;
            scale += s;
        }
        let n = m as f64;
        Estimate::centered(f_ref, num / n, den / n, tol * scale / n)
    }
}

/// Product-weight estimator at a single point `α ∈ ℝ^d`.
pub fn estimate_product_naive(input: &ProductInput, alpha: &[f64], tol: f64) -> Result<Estimate> {
    input.validate()?;
    if alpha.len() != input.g.len() {
        return Err(Error::DimensionMismatch {
            expected: input.g.len(),
            got: alpha.len(),
        });
    }
    Ok(input.at(alpha, tol))
}

/// Product-weight estimator at every path's own state; `O(d·M²)`.
pub fn estimate_product_all(input: &ProductInput, tol: f64) -> Result<EstimatorOutput> {
    input.validate()?;
    let d = input.g.len();
    let estimates = (0..input.f.len())
        .into_par_iter()
        .map(|m| {
            let alpha: Vec<f64> = (0..d).map(|i| input.g[i][m]).collect();
            input.at(&alpha, tol)
        })
        .collect();
    Ok(EstimatorOutput { estimates })
}
