//! `statichedge` command-line front-end.
//!
//! Exit status: 0 on success, 1 on bad input, 2 when a solver did not
//! converge (outputs are still written when the solver returned a result).

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use sha2::{Digest, Sha256};

use commands::{Command, Outcome};
use config::Config;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "statichedge", version, about = "Utility-optimal static hedges from vanilla options")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides `utility.gamma`.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Overrides `budget.c`.
    #[arg(long, allow_negative_numbers = true)]
    budget: Option<f64>,
    /// Overrides `solver.tol`.
    #[arg(long)]
    tol: Option<f64>,
    /// Overrides `solver.max_iter`.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Overrides `solver.surplus_to` (f, g or split).
    #[arg(long)]
    surplus_to: Option<String>,
    /// Recorded in the manifest; the solvers are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Input(format!("{}: {e}", dir.join(name).display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(dir.join(name)).map_err(|e| fail(e.error))?;
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Flat key-value manifest; the config part is re-readable with `--config`.
fn manifest(cli: &Cli, cfg: &Config, outcome: &Outcome, status: u8) -> String {
    let resolved = cfg.resolved();
    let mut m = String::from("# statichedge run manifest; pass it back with --config to re-run\n");
    let mut put = |k: &str, v: &str| m.push_str(&format!("run.{k} = {v}\n"));
    put("command", cli.command.name());
    put("config_sha256", &hex(&Sha256::digest(resolved.as_bytes())));
    put("statichedge_version", statichedge::VERSION);
    put("cli_version", env!("CARGO_PKG_VERSION"));
    put("threads", &rayon::current_num_threads().to_string());
    if let Some(seed) = cli.seed {
        put("seed", &seed.to_string());
    }
    put("converged", &outcome.converged.to_string());
    put("exit_status", &status.to_string());
    let names: Vec<&str> = outcome.files.iter().map(|(n, _)| n.as_str()).collect();
    put("outputs", &names.join(","));
    for (k, v) in &outcome.summary {
        put(k, v);
    }
    m.push_str(&resolved);
    m
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    let mut cfg = Config::load(&cli.config)?;
    if let Some(v) = cli.gamma {
        cfg.set("utility.gamma", v);
    }
    if let Some(v) = cli.budget {
        cfg.set("budget.c", v);
    }
    if let Some(v) = cli.tol {
        cfg.set("solver.tol", v);
    }
    if let Some(v) = cli.max_iter {
        cfg.set("solver.max_iter", v);
    }
    if let Some(v) = &cli.surplus_to {
        cfg.set("solver.surplus_to", v);
    }
    let outcome = commands::run(cli.command, &cfg)?;
    for key in cfg.unused("") {
        eprintln!("warning: {key} is not used by {}", cli.command.name());
    }
    let status = if outcome.converged { 0 } else { 2 };
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::Input(format!("{}: {e}", cli.out_dir.display())))?;
    for (name, bytes) in &outcome.files {
        write_atomic(&cli.out_dir, name, bytes)?;
    }
    write_atomic(&cli.out_dir, "manifest.txt", manifest(cli, &cfg, &outcome, status).as_bytes())?;
    if status != 0 {
        eprintln!("error: {} did not converge; outputs hold the last iterate", cli.command.name());
    }
    Ok(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
