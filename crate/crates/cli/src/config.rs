//! Config files, presets, and environment overrides.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use ucrlb_core::harness::{ExperimentConfig, HarnessError, RunConfig};
use ucrlb_core::mdp::EnvSpec;
use ucrlb_core::AlgoKind;

/// Error carrying its process exit code: 1 for runtime failures, 2 for
/// usage/config problems.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

pub fn runtime(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => usage(e.to_string()),
            _ => runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        runtime(e.to_string())
    }
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    cfg.validate()
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    Ok(cfg)
}

/// Scaled-down defaults for running on a laptop instead of a cluster.
pub fn apply_preset(cfg: &mut ExperimentConfig, preset: &str) -> Result<(), CliError> {
    match preset {
        "desk" => {
            cfg.run.horizon = 1 << 18;
            cfg.run.trials = 10;
            Ok(())
        }
        other => Err(usage(format!("unknown preset '{other}' (available: desk)"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub env: EnvSpec,
    pub sweep: SweepSection,
    pub run: RunConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Diameter-times-states targets.
    pub ds: Vec<u64>,
    pub algos: Vec<AlgoKind>,
}

pub fn load_sweep(path: &Path) -> Result<SweepFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: SweepFile = toml::from_str(&text)
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    if cfg.sweep.ds.is_empty() {
        return Err(usage("invalid config: sweep.ds must list at least one target"));
    }
    if cfg.sweep.algos.is_empty() {
        return Err(usage("invalid config: sweep.algos must list at least one algorithm"));
    }
    Ok(cfg)
}

/// `UCRLB_THREADS` caps trial parallelism; it must be a positive integer.
pub fn thread_override() -> Result<Option<usize>, CliError> {
    parse_threads(std::env::var("UCRLB_THREADS").ok().as_deref())
}

fn parse_threads(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(usage(format!(
                "UCRLB_THREADS must be a positive integer, got '{v}'"
            ))),
        },
    }
}
