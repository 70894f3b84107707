//! `ucrlb` — benchmark runner for the average-reward RL library.
//!
//! Subcommands: `run` executes one experiment config, `sweep` scales the
//! skill-chain family over diameter-times-states targets, `verify` replays
//! the brute-force oracle suites. Exit codes: 0 success, 1 runtime or suite
//! failure, 2 usage/config error.

mod config;
mod csv;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ucrlb_core::harness::{ds_sweep, run_experiment, DsSweepRow, ExperimentConfig, ExperimentResult};
use ucrlb_core::verify::{run_suite, VerifyScope};
use ucrlb_core::AlgoSpec;

use config::{apply_preset, load_experiment, load_sweep, runtime, thread_override, usage, CliError};

#[derive(Parser)]
#[command(name = "ucrlb", version, about = "Average-reward RL benchmark runner")]
struct Cli {
    /// Directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config; writes results.csv and summary.csv.
    Run {
        config: PathBuf,
        /// Named horizon/trial override (available: desk).
        #[arg(long)]
        preset: Option<String>,
    },
    /// Run the skill-chain scaling sweep; writes ds_sweep.csv plus the
    /// per-target results.csv and summary.csv.
    Sweep {
        config: PathBuf,
        /// Append a sqrt(ds) reference column calibrated to the first row.
        #[arg(long)]
        reference: bool,
    },
    /// Check the optimistic-transition machinery against brute-force oracles
    /// on randomized inputs.
    Verify {
        /// subsets | optimism | submodularity | bounds | all
        #[arg(long, default_value = "all")]
        scope: String,
        /// Negative control: deliberately break the inputs; the suites are
        /// then expected to report failures (exit 1).
        #[arg(long)]
        corrupt: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, preset } => cmd_run(&cli.out, &config, preset.as_deref()),
        Command::Sweep { config, reference } => cmd_sweep(&cli.out, &config, reference),
        Command::Verify {
            scope,
            corrupt,
            seed,
        } => cmd_verify(&cli.out, &scope, corrupt, seed),
    }
}

fn cmd_run(out: &Path, config: &Path, preset: Option<&str>) -> Result<(), CliError> {
    let mut cfg = load_experiment(config)?;
    if let Some(name) = preset {
        apply_preset(&mut cfg, name)?;
    }
    if let Some(n) = thread_override()? {
        cfg.run.threads = Some(n);
    }
    let result = run_experiment(&cfg)?;
    let final_point = result
        .summary
        .last()
        .ok_or_else(|| runtime("experiment produced no checkpoints"))?;
    println!(
        "{} on {}: mean regret {:.2} (std {:.2}) at t={} over {} trials",
        result.algo, result.env, final_point.mean_regret, final_point.std_regret, final_point.t,
        cfg.run.trials
    );
    let results = [result];
    csv::write_file(&out.join("results.csv"), &csv::results_csv(&results))?;
    csv::write_file(&out.join("summary.csv"), &csv::summary_csv(&results))?;
    println!("wrote {}", out.join("results.csv").display());
    println!("wrote {}", out.join("summary.csv").display());
    Ok(())
}

fn cmd_sweep(out: &Path, config: &Path, reference: bool) -> Result<(), CliError> {
    let sweep = load_sweep(config)?;
    let threads = thread_override()?;

    let mut algos = sweep.sweep.algos.clone();
    algos.sort_by_key(|k| k.label());
    algos.dedup();
    let mut ds_values = sweep.sweep.ds.clone();
    ds_values.sort_unstable();
    ds_values.dedup();

    let mut rows: Vec<DsSweepRow> = Vec::new();
    let mut results: Vec<ExperimentResult> = Vec::new();
    for kind in algos {
        let mut cfg = ExperimentConfig {
            env: sweep.env.clone(),
            algo: AlgoSpec::new(kind),
            run: sweep.run.clone(),
        };
        if let Some(n) = threads {
            cfg.run.threads = Some(n);
        }
        for (row, result) in ds_sweep(&cfg, &ds_values)? {
            println!(
                "{} ds={} (S={}, D={:.1}): normalized regret {:.3}",
                row.algo, row.ds, row.s, row.d, row.norm_regret
            );
            rows.push(row);
            results.push(result);
        }
    }
    csv::write_file(&out.join("ds_sweep.csv"), &csv::ds_sweep_csv(&rows, reference))?;
    csv::write_file(&out.join("results.csv"), &csv::results_csv(&results))?;
    csv::write_file(&out.join("summary.csv"), &csv::summary_csv(&results))?;
    println!("wrote {}", out.join("ds_sweep.csv").display());
    Ok(())
}

fn cmd_verify(out: &Path, scope_name: &str, corrupt: bool, seed: u64) -> Result<(), CliError> {
    let scope = VerifyScope::parse(scope_name).ok_or_else(|| {
        usage(format!(
            "unknown scope '{scope_name}' (available: subsets, optimism, submodularity, bounds, all)"
        ))
    })?;
    if corrupt && !scope.supports_corruption() {
        return Err(usage(
            "scope 'bounds' checks closed-form expressions and has no corruption mode",
        ));
    }

    // Expand `all` so each suite gets its own status line.
    let suites: Vec<(&str, VerifyScope)> = match scope {
        VerifyScope::All => {
            let mut v = vec![
                ("subsets", VerifyScope::Subsets),
                ("optimism", VerifyScope::Optimism),
                ("submodularity", VerifyScope::Submodularity),
            ];
            if !corrupt {
                v.push(("bounds", VerifyScope::Bounds));
            }
            v
        }
        s => vec![(scope_name, s)],
    };

    let mut dump = String::new();
    let mut total_failures = 0usize;
    for (name, s) in suites {
        let report = run_suite(s, corrupt, seed);
        let status = if report.passed() { "PASS" } else { "FAIL" };
        println!(
            "suite {name}: {} cases, {} failures: {status}",
            report.cases,
            report.failures.len()
        );
        total_failures += report.failures.len();
        for line in &report.failures {
            dump.push_str(name);
            dump.push_str(": ");
            dump.push_str(line);
            dump.push('\n');
        }
    }

    if total_failures > 0 {
        let path = out.join("verify_failures").join(format!("{scope_name}.txt"));
        csv::write_file(&path, &dump)?;
        println!("wrote counterexamples to {}", path.display());
        if corrupt {
            println!("(corrupt mode: failures above mean the oracles caught the corruption)");
        }
        return Err(runtime(format!("{total_failures} oracle failures")));
    }
    Ok(())
}
