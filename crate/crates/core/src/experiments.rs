//! Batch experiments: price tables, error curves, localizer comparisons and
//! path dumps, all written as CSV with a commented config header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{version_string, RunConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate_naive, EstimatorInput};
use crate::fd::{solve_american_pide, solve_european_pide, FdSolution};
use crate::localization::{LocalizerKind, LocalizerPolicy};
use crate::paths::{simulate_ensemble, PathBundle};
use crate::pricer::{price_american, PricingConfig, PricingResult};
use crate::weights::WeightEngine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table,
    ErrorCurve,
    VarianceStudy,
    SinglePrice,
    FdOnly,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table => "table",
            ExperimentKind::ErrorCurve => "error-curve",
            ExperimentKind::VarianceStudy => "variance-study",
            ExperimentKind::SinglePrice => "single-price",
            ExperimentKind::FdOnly => "fd-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub config: RunConfig,
    pub n_list: Vec<usize>,
    pub mc_list: Vec<usize>,
    pub replications: usize,
    /// Replication `r` uses seed `seed + r`.
    pub seed: u64,
}

impl ExperimentPlan {
    /// Plan with the lists, replication count and seed taken from `config`.
    pub fn new(kind: ExperimentKind, config: RunConfig) -> Self {
        Self {
            kind,
            n_list: config.experiment.n_list.clone(),
            mc_list: config.experiment.mc_list.clone(),
            replications: config.experiment.replications,
            seed: config.simulation.seed,
            config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.mc_list.is_empty() {
            return Err(Error::InvalidInput("N and MC lists must be nonempty".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be positive".into()));
        }
        self.config.validate()
    }

    fn header(&self) -> String {
        let mut h = format!("# mfmc {}\n# experiment: {}\n", version_string(), self.kind.name());
        let _ = writeln!(
            h,
            "# n_list: {:?}\n# mc_list: {:?}\n# replications: {}\n# seed: {}",
            self.n_list, self.mc_list, self.replications, self.seed
        );
        h + &self.config.echo()
    }
}

/// Mean and standard error; the latter is `None` for fewer than two values.
pub fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10}")).unwrap_or_default()
}

/// `P̄ ≥ Φ(x₀)` and American ≥ European.
pub fn invariants_hold(r: &PricingResult) -> bool {
    r.price >= r.intrinsic && r.price >= r.european
}

struct Cell {
    n: usize,
    mc: usize,
    runs: Vec<Result<PricingResult>>,
}

fn run_grid(plan: &ExperimentPlan, cfg_for: impl Fn(usize, usize, u64) -> PricingConfig + Sync) -> Vec<Cell> {
    let jobs: Vec<(usize, usize, usize)> = plan
        .n_list
        .iter()
        .flat_map(|&n| plan.mc_list.iter().map(move |&mc| (n, mc)))
        .flat_map(|(n, mc)| (0..plan.replications).map(move |r| (n, mc, r)))
        .collect();
    let results: Vec<Result<PricingResult>> = jobs
        .par_iter()
        .map(|&(n, mc, r)| price_american(&cfg_for(n, mc, plan.seed + r as u64)))
        .collect();
    let mut cells: Vec<Cell> = Vec::new();
    for ((n, mc, _), res) in jobs.into_iter().zip(results) {
        match cells.last_mut() {
            Some(c) if c.n == n && c.mc == mc => c.runs.push(res),
            _ => cells.push(Cell { n, mc, runs: vec![res] }),
        }
    }
    cells
}

fn first_error(runs: &[Result<PricingResult>]) -> Option<String> {
    let failed = runs.iter().filter(|r| r.is_err()).count();
    runs.iter()
        .find_map(|r| r.as_ref().err())
        .map(|e| format!("{failed}/{} replications failed: {e}", runs.len()))
}

fn fd_benchmark(config: &RunConfig) -> Result<FdSolution> {
    if config.dimension() != 1 {
        return Err(Error::UnsupportedModel("finite differences are one-dimensional".into()));
    }
    solve_american_pide(&config.assets[0], &config.payoff, &config.market, &config.fd)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub n: usize,
    pub mc: usize,
    /// Replication mean.
    pub price: Option<f64>,
    pub std_error: Option<f64>,
    pub fd_price: Option<f64>,
    pub abs_error: Option<f64>,
    /// Every replication satisfied the pricing invariants.
    pub invariants: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub header: String,
    pub rows: Vec<TableRow>,
    pub fd_price: Option<f64>,
    /// Set when the benchmark was expected but failed.
    pub fd_error: Option<String>,
}

impl TableReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count() + usize::from(self.fd_error.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.clone();
        if let Some(e) = &self.fd_error {
            let _ = writeln!(out, "# fd_error: {e}");
        }
        out.push_str("N,MC,price,std_error,fd_price,abs_error,invariants,error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n,
                r.mc,
                opt(r.price),
                opt(r.std_error),
                opt(r.fd_price),
                opt(r.abs_error),
                r.invariants
                    .map(|b| if b { "ok" } else { "violated" })
                    .unwrap_or_default(),
                csv_field(r.error.as_deref().unwrap_or(""))
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One price per `(N, MC)` cell, averaged over the replications, next to
/// the finite-difference benchmark for one-asset configs.
pub fn run_table(plan: &ExperimentPlan) -> Result<TableReport> {
    plan.validate()?;
    let config = &plan.config;
    let (fd_price, fd_error) = if config.dimension() == 1 {
        match fd_benchmark(config) {
            Ok(s) => (Some(s.price), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let cells = run_grid(plan, |n, mc, seed| config.pricing_with(n, mc, seed));
    let rows = cells
        .into_iter()
        .map(|cell| {
            let error = first_error(&cell.runs);
            let ok: Vec<&PricingResult> = cell.runs.iter().filter_map(|r| r.as_ref().ok()).collect();
            let (price, std_error) = if error.is_none() {
                let prices: Vec<f64> = ok.iter().map(|r| r.price).collect();
                let (m, se) = mean_se(&prices);
                (Some(m), se)
            } else {
                (None, None)
            };
            TableRow {
                n: cell.n,
                mc: cell.mc,
                price,
                std_error,
                fd_price,
                abs_error: price.zip(fd_price).map(|(p, f)| (p - f).abs()),
                invariants: (!ok.is_empty()).then(|| ok.iter().all(|r| invariants_hold(r))),
                error,
            }
        })
        .collect();
    Ok(TableReport {
        header: plan.header(),
        rows,
        fd_price,
        fd_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub mc: usize,
    /// Mean of `|MMC − FD|` over replications.
    pub mean_abs_error: Option<f64>,
    /// Its standard error; `None` when `R = 1`.
    pub std_error: Option<f64>,
    pub mean_price: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurveReport {
    pub header: String,
    pub fd_price: f64,
    pub rows: Vec<ErrorRow>,
    /// Soft trend checks that did not hold.
    pub warnings: Vec<String>,
}

impl ErrorCurveReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.clone();
        let _ = writeln!(out, "# fd_price: {:.10}", self.fd_price);
        for w in &self.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        out.push_str("N,MC,mean_abs_error,std_error,mean_price,error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                r.mc,
                opt(r.mean_abs_error),
                opt(r.std_error),
                opt(r.mean_price),
                csv_field(r.error.as_deref().unwrap_or(""))
            );
        }
        out
    }
}

/// Absolute error against the benchmark per `(N, MC)`, with error bars.
pub fn run_error_curve(plan: &ExperimentPlan) -> Result<ErrorCurveReport> {
    plan.validate()?;
    let config = &plan.config;
    let fd_price = fd_benchmark(config)?.price;
    let cells = run_grid(plan, |n, mc, seed| config.pricing_with(n, mc, seed));
    let rows: Vec<ErrorRow> = cells
        .into_iter()
        .map(|cell| {
            let error = first_error(&cell.runs);
            if error.is_some() {
                return ErrorRow {
                    n: cell.n,
                    mc: cell.mc,
                    mean_abs_error: None,
                    std_error: None,
                    mean_price: None,
                    error,
                };
            }
            let prices: Vec<f64> = cell.runs.iter().flatten().map(|r| r.price).collect();
            let errs: Vec<f64> = prices.iter().map(|p| (p - fd_price).abs()).collect();
            let (mean, se) = mean_se(&errs);
            ErrorRow {
                n: cell.n,
                mc: cell.mc,
                mean_abs_error: Some(mean),
                std_error: se,
                mean_price: Some(mean_se(&prices).0),
                error: None,
            }
        })
        .collect();

    let mut warnings = Vec::new();
    let (mc_lo, mc_hi) = (
        *plan.mc_list.iter().min().expect("nonempty"),
        *plan.mc_list.iter().max().expect("nonempty"),
    );
    for &n in &plan.n_list {
        let at = |mc| {
            rows.iter()
                .find(|r| r.n == n && r.mc == mc)
                .and_then(|r| r.mean_abs_error)
        };
        if let (Some(lo), Some(hi)) = (at(mc_lo), at(mc_hi)) {
            if hi > lo {
                warnings.push(format!(
                    "N={n}: mean error at MC={mc_hi} ({hi:.3e}) exceeds MC={mc_lo} ({lo:.3e})"
                ));
            }
        }
    }
    Ok(ErrorCurveReport {
        header: plan.header(),
        fd_price,
        rows,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub localizer: LocalizerKind,
    pub n: usize,
    pub mc: usize,
    pub mean_price: Option<f64>,
    pub variance: Option<f64>,
    /// Mean wall time per replication.
    pub wall_time_secs: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub header: String,
    pub rows: Vec<VarianceRow>,
}

impl VarianceReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.clone();
        out.push_str("localizer,N,MC,mean_price,variance,wall_time_secs,error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{}",
                r.localizer.name(),
                r.n,
                r.mc,
                opt(r.mean_price),
                opt(r.variance),
                r.wall_time_secs,
                csv_field(r.error.as_deref().unwrap_or(""))
            );
        }
        out
    }
}

/// Price statistics over `R` paired-seed replications for each localizer
/// kind, at the config's `(N, M)`.
pub fn run_variance_study(plan: &ExperimentPlan, kinds: &[LocalizerKind]) -> Result<VarianceReport> {
    plan.validate()?;
    let sim = plan.config.simulation;
    let rows = kinds
        .iter()
        .map(|&kind| {
            let runs: Vec<Result<PricingResult>> = (0..plan.replications)
                .map(|r| {
                    let mut cfg = plan.config.pricing_with(sim.steps, sim.paths, plan.seed + r as u64);
                    cfg.localizer = LocalizerPolicy { kind, ..cfg.localizer };
                    price_american(&cfg)
                })
                .collect();
            let error = first_error(&runs);
            let ok: Vec<&PricingResult> = runs.iter().flatten().collect();
            let prices: Vec<f64> = ok.iter().map(|r| r.price).collect();
            let wall = ok.iter().map(|r| r.wall_time_secs).sum::<f64>() / ok.len().max(1) as f64;
            VarianceRow {
                localizer: kind,
                n: sim.steps,
                mc: sim.paths,
                mean_price: error.is_none().then(|| mean_se(&prices).0),
                variance: (error.is_none() && prices.len() > 1).then(|| sample_variance(&prices)),
                wall_time_secs: wall,
                error,
            }
        })
        .collect();
    Ok(VarianceReport {
        header: plan.header(),
        rows,
    })
}

/// Spread of single-point continuation estimates across disjoint path blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockVariance {
    pub step: usize,
    /// Conditioning point, the median of `X_{t_k}`.
    pub alpha: f64,
    pub localized: f64,
    pub unlocalized: f64,
    /// Mean estimated `λ` over blocks.
    pub mean_lambda: f64,
}

/// Estimates `E[Φ(X_{t_{k+1}}) | X_{t_k} = α]` on `blocks` disjoint blocks
/// of one one-asset ensemble, once with `kind` and `λ̂` per block and once
/// unlocalized, and returns the sample variance of each set of estimates.
pub fn continuation_block_variance(
    cfg: &PricingConfig,
    step: usize,
    blocks: usize,
    kind: LocalizerKind,
) -> Result<BlockVariance> {
    cfg.validate()?;
    if cfg.model.dimension() != 1 {
        return Err(Error::UnsupportedModel("block variance is one-dimensional".into()));
    }
    if blocks < 2 || cfg.paths / blocks < 2 {
        return Err(Error::InvalidInput(format!(
            "cannot split {} paths into {blocks} blocks",
            cfg.paths
        )));
    }
    let bundle = simulate_ensemble(&cfg.model, cfg.grid()?, cfg.paths, cfg.seed)?;
    let engine = WeightEngine::build(&bundle, &cfg.model.assets)?;
    let pi = engine.window(&bundle, 0, step)?.pi;
    let g = bundle.assets[0].states_at(step);
    let f: Vec<f64> = bundle.assets[0]
        .states_at(step + 1)
        .iter()
        .map(|&x| cfg.payoff.eval1(x))
        .collect();
    let mut sorted = g.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = sorted[sorted.len() / 2];

    let size = cfg.paths / blocks;
    let policy = LocalizerPolicy { kind, ..cfg.localizer };
    let mut loc_est = Vec::with_capacity(blocks);
    let mut raw_est = Vec::with_capacity(blocks);
    let mut lambdas = 0.0;
    for b in 0..blocks {
        let r = b * size..(b + 1) * size;
        let (gb, fb, pb) = (&g[r.clone()], &f[r.clone()], &pi[r]);
        let f_sq: Vec<f64> = fb.iter().map(|v| v * v).collect();
        let loc = policy.resolve(&f_sq, pb);
        lambdas += loc.lambda().unwrap_or(0.0);
        for (localizer, out) in [
            (loc, &mut loc_est),
            (LocalizerPolicy::none().resolve(&f_sq, pb), &mut raw_est),
        ] {
            let mut input = EstimatorInput::new(gb, fb, pb, localizer);
            input.offset = cfg.heaviside_offset;
            let e = estimate_naive(&input, alpha, cfg.den_tol)?;
            out.push(e.numerator / e.denominator);
        }
    }
    Ok(BlockVariance {
        step,
        alpha,
        localized: sample_variance(&loc_est),
        unlocalized: sample_variance(&raw_est),
        mean_lambda: lambdas / blocks as f64,
    })
}

/// Benchmark values on the spatial grid at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub header: String,
    pub american: FdSolution,
    pub european: FdSolution,
}

impl FdReport {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.clone();
        let _ = writeln!(
            out,
            "# price_american: {:.10}\n# price_european: {:.10}\n# x_max: {}\n# clamped_shifts: {}",
            self.american.price, self.european.price, self.american.x_max, self.american.clamped_shifts
        );
        out.push_str("x,american,european\n");
        for (i, x) in self.american.x.iter().enumerate() {
            let _ = writeln!(
                out,
                "{x:.10},{:.10},{:.10}",
                self.american.values[i], self.european.values[i]
            );
        }
        out
    }
}

pub fn run_fd(config: &RunConfig) -> Result<FdReport> {
    config.validate()?;
    let american = fd_benchmark(config)?;
    let european = solve_european_pide(&config.assets[0], &config.payoff, &config.market, &config.fd)?;
    let plan = ExperimentPlan::new(ExperimentKind::FdOnly, config.clone());
    Ok(FdReport {
        header: plan.header(),
        american,
        european,
    })
}

/// JSON record of one pricing run with the config echo.
pub fn price_record(config: &RunConfig, result: &PricingResult) -> String {
    #[derive(Serialize)]
    struct Record<'a> {
        version: String,
        config: &'a RunConfig,
        result: &'a PricingResult,
    }
    serde_json::to_string_pretty(&Record {
        version: version_string(),
        config,
        result,
    })
    .expect("record serializes")
}

/// Writes `paths.csv`, `jumps.csv` and, when `with_weights`, `weights.csv`
/// (per-path `Π` at every window) into `dir`. Returns the written files.
pub fn dump_paths(config: &RunConfig, cfg: &PricingConfig, dir: &Path, with_weights: bool) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let bundle = simulate_ensemble(&cfg.model, cfg.grid()?, cfg.paths, cfg.seed)?;
    let header = ExperimentPlan::new(ExperimentKind::SinglePrice, config.clone()).header();
    let mut files = vec![write_paths(&bundle, dir, &header)?, write_jumps(&bundle, dir, &header)?];
    if with_weights && bundle.grid.steps > 1 {
        files.push(write_weights(cfg, &bundle, dir, &header)?);
    }
    Ok(files)
}

fn with_header(
    dir: &Path,
    name: &str,
    header: &str,
    fill: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
) -> Result<PathBuf> {
    let mut buf = header.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        fill(&mut w)?;
        w.flush()?;
    }
    let path = dir.join(name);
    fs::write(&path, buf)?;
    Ok(path)
}

fn write_paths(bundle: &PathBundle, dir: &Path, header: &str) -> Result<PathBuf> {
    with_header(dir, "paths.csv", header, |w| {
        w.write_record(["asset", "path", "step", "time", "state", "variation", "mean"])?;
        for (i, a) in bundle.assets.iter().enumerate() {
            for m in 0..bundle.path_count() {
                for k in 0..=bundle.grid.steps {
                    w.serialize((
                        i,
                        m,
                        k,
                        bundle.grid.time(k),
                        a.state(k, m),
                        a.variation(k, m),
                        a.mean_stats[k],
                    ))?;
                }
            }
        }
        Ok(())
    })
}

fn write_jumps(bundle: &PathBundle, dir: &Path, header: &str) -> Result<PathBuf> {
    with_header(dir, "jumps.csv", header, |w| {
        w.write_record(["asset", "path", "step", "time", "mark", "pre_state", "pre_variation"])?;
        for (i, a) in bundle.assets.iter().enumerate() {
            for (m, js) in a.jumps.iter().enumerate() {
                for j in js {
                    w.serialize((i, m, j.step, j.time, j.mark, j.pre_state, j.pre_variation))?;
                }
            }
        }
        Ok(())
    })
}

fn write_weights(cfg: &PricingConfig, bundle: &PathBundle, dir: &Path, header: &str) -> Result<PathBuf> {
    let engine = WeightEngine::build(bundle, &cfg.model.assets)?;
    with_header(dir, "weights.csv", header, |w| {
        w.write_record(["asset", "path", "step", "pi", "pi1_alpha", "correction"])?;
        for i in 0..bundle.dimension() {
            for k in 1..bundle.grid.steps {
                let set = engine.window(bundle, i, k)?;
                for m in 0..bundle.path_count() {
                    w.serialize((i, m, k, set.pi[m], set.pi1_alpha[m], set.correction[m]))?;
                }
            }
        }
        Ok(())
    })
}
