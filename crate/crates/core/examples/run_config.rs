//! Runs a bundled JSON configuration in-process, as the binary would, and
//! writes its outputs to a directory.
//!
//! `cargo run --release --example run_config -- configs/pd_table.json out/pd`

use std::path::PathBuf;

use wiresoup::cli::{run_task, write_outputs, RunConfig, RunOptions};

fn main() -> wiresoup::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/split_merge.json").into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/example".into()));
    let c = RunConfig::from_json(&std::fs::read_to_string(&config)?)?;
    let outcome = run_task(&c, &RunOptions::default())?;
    for v in &outcome.verdicts {
        println!("{}", v.line());
    }
    let summary = write_outputs(&out, &c, 1, &outcome)?;
    println!("config hash {} -> {}", summary.config_hash, out.display());
    Ok(())
}
