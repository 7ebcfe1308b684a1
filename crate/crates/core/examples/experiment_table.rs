//! A small N × MC price table with its FD column, written as CSV to stdout.

use mfmalliavin::config::RunConfig;
use mfmalliavin::experiments::{run_table, ExperimentKind, ExperimentPlan};
use mfmalliavin::fd::FdGrid;

fn main() -> mfmalliavin::Result<()> {
    let mut cfg = RunConfig::shipped("example2")?;
    cfg.fd = FdGrid {
        nodes: 400,
        time_steps: 800,
        x_max: None,
    };
    let mut plan = ExperimentPlan::new(ExperimentKind::Table, cfg);
    plan.n_list = vec![16, 32];
    plan.mc_list = vec![200, 500];
    plan.replications = 2;
    let report = run_table(&plan)?;
    print!("{}", report.to_csv());
    eprintln!("failed cells: {}", report.failures());
    Ok(())
}
