//! `symsde`: run symsde experiments and checks from a JSON config or a named
//! preset, writing `PREFIX.csv`, `PREFIX.json` and `PREFIX.manifest.json`.
//!
//! Exit status: 0 on success, 1 when the config is invalid, 2 when the run
//! fails or its results are unusable.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "symsde", version, about = "Symmetry-adapted SDE integrators: experiments and checks")]
struct Args {
    /// JSON run config, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (fig1, fig2, fig3, fig4).
    #[arg(long)]
    preset: Option<String>,
    /// Number of Monte-Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output prefix.
    #[arg(long)]
    out: Option<String>,
}

fn write_file(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {path}: {e}")))
}

fn write_manifest(prefix: &str, cfg: &RunConfig, status: &str, error: Option<&str>, outputs: &[String]) -> Result<(), CliError> {
    let manifest = json!({
        "status": status,
        "error": error,
        "config": cfg,
        "master_seed": cfg.master_seed,
        "versions": {
            "symsde-cli": env!("CARGO_PKG_VERSION"),
            "symsde-core": symsde_core::VERSION,
        },
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_file(&format!("{prefix}.manifest.json"), text.as_bytes())
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(Path::new(path))?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        preset: args.preset,
        paths: args.paths,
        master_seed: args.seed,
        workers: args.workers,
        out: args.out,
        ..RunConfig::default()
    };
    cfg = cfg.overlay(&flags);
    let prefix = cfg.out_prefix().to_string();
    let resolved = match cfg.clone().resolve() {
        Ok(c) => c,
        Err(e) => {
            let _ = write_manifest(&prefix, &cfg, "invalid", Some(&e.to_string()), &[]);
            return Err(e);
        }
    };
    let outputs = match run::run(&resolved) {
        Ok(o) => o,
        Err(e) => {
            let status = if e.code() == 1 { "invalid" } else { "failed" };
            let _ = write_manifest(&prefix, &resolved, status, Some(&e.to_string()), &[]);
            return Err(e);
        }
    };
    let csv_path = format!("{prefix}.csv");
    let json_path = format!("{prefix}.json");
    let mut json = serde_json::to_string_pretty(&outputs.json).map_err(|e| CliError::Runtime(e.to_string()))?;
    json.push('\n');
    write_file(&csv_path, &outputs.csv)?;
    write_file(&json_path, json.as_bytes())?;
    let status = if outputs.failure.is_some() { "failed" } else { "ok" };
    write_manifest(&prefix, &resolved, status, outputs.failure.as_deref(), &[csv_path, json_path])?;
    match outputs.failure {
        Some(msg) => Err(CliError::Runtime(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("symsde: {e}");
            ExitCode::from(e.code())
        }
    }
}
