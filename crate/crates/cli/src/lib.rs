//! Config loading, experiment dispatch and output persistence for the
//! `fairloop` binary.

pub mod config;
pub mod defaults;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::Path;

use config::{ExperimentConfig, RunOptions};
use error::CliResult;
use output::RunManifest;

/// Runs a resolved config and persists its outputs and manifest.
pub fn run_resolved(cfg: &ExperimentConfig) -> CliResult<(RunManifest, Vec<String>)> {
    let started = output::unix_ms();
    let outcome = experiments::execute(cfg)?;
    let manifest = output::persist(cfg, &outcome.artifacts, started)?;
    Ok((manifest, outcome.summary))
}

/// Re-runs the config echoed in a manifest. `opts.out` redirects the outputs.
pub fn replay(manifest: &Path, opts: &RunOptions) -> CliResult<(RunManifest, Vec<String>)> {
    let m = output::read_manifest(manifest)?;
    let cfg = config::from_echo(m.config, opts)?;
    run_resolved(&cfg)
}

/// `name  description`, alphabetical, one per line.
pub fn list_experiments() -> String {
    config::Experiment::ALL
        .iter()
        .map(|e| format!("{:<12}{}\n", e.name(), e.description()))
        .collect()
}
