use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfmalliavin::config::RunConfig;
use mfmalliavin::experiments::{
    dump_paths, price_record, run_error_curve, run_fd, run_table, run_variance_study, ExperimentKind, ExperimentPlan,
};
use mfmalliavin::localization::LocalizerKind;
use mfmalliavin::pricer::price_american;
use mfmalliavin::rng::with_threads;
use mfmalliavin::Result;

#[derive(Parser)]
#[command(
    name = "mfmc",
    version,
    about = "Malliavin Monte Carlo pricing of American options under mean-field jump SDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Config file, or the name of a shipped config (e.g. `example2`).
    #[arg(long, global = true, default_value = "example2")]
    config: String,
    /// Master seed; replication r uses seed + r.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// none, laplace or onesided.
    #[arg(long, global = true)]
    localizer: Option<LocalizerKind>,
    /// Fixed localization parameter instead of the per-step estimate.
    #[arg(long, global = true)]
    lambda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Price once with the config's N and M; prints a JSON record.
    Price,
    /// N × MC price table with the finite-difference column.
    Table,
    /// Mean absolute error against the benchmark per (N, MC).
    ErrorCurve,
    /// Price mean and variance for each localizer kind.
    VarianceStudy,
    /// Finite-difference benchmark on the spatial grid.
    Fd,
    /// Simulated paths, jumps and (optionally) weights as CSV.
    DumpPaths {
        #[arg(long)]
        weights: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let as_file = Path::new(&common.config);
    let mut cfg = if as_file.exists() || common.config.ends_with(".toml") || common.config.contains('/') {
        RunConfig::load(&common.config)?
    } else {
        RunConfig::shipped(&common.config)?
    };
    if let Some(s) = common.seed {
        cfg.simulation.seed = s;
    }
    if let Some(r) = common.replications {
        cfg.experiment.replications = r;
    }
    if let Some(k) = common.localizer {
        cfg.localizer.kind = k;
    }
    if common.lambda.is_some() {
        cfg.localizer.lambda = common.lambda;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(file);
            std::fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Returns the number of failed cells.
fn run(cli: &Cli) -> Result<usize> {
    let cfg = load(&cli.common)?;
    for key in &cfg.defaults_used {
        eprintln!("note: {key} not set, using its default");
    }
    let out = cli.common.out.as_deref();
    match &cli.command {
        Command::Price => {
            let result = price_american(&cfg.pricing())?;
            emit(out, "price.json", &(price_record(&cfg, &result) + "\n"))?;
            Ok(0)
        }
        Command::Table => {
            let report = run_table(&ExperimentPlan::new(ExperimentKind::Table, cfg))?;
            emit(out, "table.csv", &report.to_csv())?;
            Ok(report.failures())
        }
        Command::ErrorCurve => {
            let report = run_error_curve(&ExperimentPlan::new(ExperimentKind::ErrorCurve, cfg))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(out, "error_curve.csv", &report.to_csv())?;
            Ok(report.failures())
        }
        Command::VarianceStudy => {
            let kinds = [LocalizerKind::None, LocalizerKind::Laplace, LocalizerKind::OneSided];
            let report = run_variance_study(&ExperimentPlan::new(ExperimentKind::VarianceStudy, cfg), &kinds)?;
            emit(out, "variance_study.csv", &report.to_csv())?;
            Ok(report.failures())
        }
        Command::Fd => {
            emit(out, "fd.csv", &run_fd(&cfg)?.to_csv())?;
            Ok(0)
        }
        Command::DumpPaths { weights } => {
            let dir = out.unwrap_or(Path::new("."));
            for f in dump_paths(&cfg, &cfg.pricing(), dir, *weights)? {
                eprintln!("wrote {}", f.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .common
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match with_threads(threads, || run(&cli)) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} cell(s) failed; see the error column");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
