//! CSV emission. Plain `{}` float formatting keeps output byte-stable across
//! runs so result files can be diffed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ucrlb_core::harness::{DsSweepRow, ExperimentResult};

use crate::config::CliError;

pub fn results_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("algo,env,trial,t,cum_regret,episodes\n");
    for res in results {
        for trace in &res.traces {
            for (i, &t) in trace.checkpoints.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    res.algo,
                    res.env,
                    trace.trial,
                    t,
                    trace.cum_regret[i],
                    trace.episodes_at_checkpoint[i]
                )
                .unwrap();
            }
        }
    }
    out
}

pub fn summary_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("algo,env,t,mean_regret,std_regret\n");
    for res in results {
        for point in &res.summary {
            writeln!(
                out,
                "{},{},{},{},{}",
                res.algo, res.env, point.t, point.mean_regret, point.std_regret
            )
            .unwrap();
        }
    }
    out
}

/// One row per (algorithm, DS target). With `reference` set, appends a
/// `sqrt(ds)`-shaped curve calibrated to the first row so slopes can be read
/// off against the ideal square-root growth.
pub fn ds_sweep_csv(rows: &[DsSweepRow], reference: bool) -> String {
    let mut out = String::new();
    if reference {
        out.push_str("algo,ds,s,d,norm_regret,reference\n");
        let scale = rows
            .first()
            .map(|r| r.norm_regret / (r.ds as f64).sqrt())
            .unwrap_or(0.0);
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.algo,
                r.ds,
                r.s,
                r.d,
                r.norm_regret,
                scale * (r.ds as f64).sqrt()
            )
            .unwrap();
        }
    } else {
        out.push_str("algo,ds,s,d,norm_regret\n");
        for r in rows {
            writeln!(out, "{},{},{},{},{}", r.algo, r.ds, r.s, r.d, r.norm_regret).unwrap();
        }
    }
    out
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}
