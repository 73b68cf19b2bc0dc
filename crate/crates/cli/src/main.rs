//! `boolperc`: run a JSON-configured Boolean percolation experiment and write
//! its artifacts under `<out>/<config hash>/`.
//!
//! Exit codes: 0 ok, 2 config error, 3 infeasible parameters, 4 internal
//! invariant breach, 1 anything else (e.g. unwritable output directory).

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use config::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "boolperc", version, about = "Boolean percolation simulation and verification runs")]
struct Args {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the configuration's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
    /// Output root; the BOOLPERC_OUT environment variable takes precedence
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-run configurations already recorded in runs.log
    #[arg(long)]
    force: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<boolperc::Error>() {
        Some(boolperc::Error::InvariantBreach(_)) => 4,
        Some(boolperc::Error::Io(_)) => 1,
        Some(_) => 3,
        None => 1,
    }
}

fn real_main(args: Args) -> Result<()> {
    let mut cfg = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    }
    let root = std::env::var_os("BOOLPERC_OUT")
        .map(PathBuf::from)
        .or(args.out)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let done = output::completed(&root)?;
    for run_cfg in cfg.expand() {
        let hash = run_cfg.hash();
        if done.contains(&hash) && !args.force {
            println!("skip {hash} (lambda={})", run_cfg.model.lambda);
            continue;
        }
        let art = run::execute(&run_cfg)?;
        let dir = output::write_run(&root, &run_cfg, &hash, &art)?;
        output::append_log(&root, &run_cfg, &hash)?;
        println!("done {hash} (lambda={}) -> {}", run_cfg.model.lambda, dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match std::panic::catch_unwind(|| real_main(args)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal invariant breached (panic)");
            ExitCode::from(4)
        }
    }
}
