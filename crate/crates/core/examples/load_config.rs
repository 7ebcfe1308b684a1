//! Loads a run config from a file (or the shipped example1), validates it and
//! prints the resolved settings.
//!
//! cargo run --example load_config -- configs/example2.toml

use mfmalliavin::config::{version_string, RunConfig, SHIPPED};

fn main() -> mfmalliavin::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::shipped("example1")?,
    };
    cfg.validate()?;
    println!("{}", version_string());
    println!("shipped: {:?}", SHIPPED.iter().map(|(n, _)| *n).collect::<Vec<_>>());
    println!("dimension {}, defaults used {:?}", cfg.dimension(), cfg.defaults_used);
    print!("{}", cfg.echo());
    Ok(())
}
