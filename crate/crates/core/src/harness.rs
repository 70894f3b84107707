//! Trial execution: seeded streams, identifier masking, regret accounting,
//! checkpointing, parallel trial running, and the diameter-times-states
//! scaling sweep.
//!
//! The protocol's central device: environment randomness comes from per-(s,a)
//! streams keyed by the TRUE indices, so two algorithms taking the same
//! actions in the same trial consume identical transition and reward samples
//! even when each hides behind a different identifier masking.

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::agents::{build_agent, Agent, AgentError, AlgoKind, AlgoSpec};
use crate::mdp::{build_env, diameter, optimal_gain, ConfigError, EnvKind, EnvSpec, SolveError, TabularMDP};
use crate::streams::{make_streams, masking_maps, MaskingMaps};
use crate::verify::episode_bound;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solving the true model failed: {0}")]
    Solve(#[from] SolveError),
    #[error("trial {trial} failed: {source}")]
    Agent { trial: u32, source: AgentError },
    #[error(
        "trial {trial}: {episodes} episodes exceed the guaranteed bound {bound:.3} \
         (S={num_states}, A={num_actions}, T={horizon})"
    )]
    EpisodeBound {
        trial: u32,
        episodes: u64,
        bound: f64,
        num_states: usize,
        num_actions: usize,
        horizon: u64,
    },
    #[error("ds target {ds}: {reason}")]
    Tuning { ds: u64, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: u64,
    pub trials: u32,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_masking")]
    pub masking: bool,
    /// Geometric spacing of the regret checkpoints.
    #[serde(default = "default_checkpoint_ratio")]
    pub checkpoint_ratio: u64,
    /// Trial-level parallelism cap; `None` uses the process default.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_delta() -> f64 {
    0.05
}

fn default_masking() -> bool {
    true
}

fn default_checkpoint_ratio() -> u64 {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algo: AlgoSpec,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.horizon < 1 {
            return Err(invalid("run.horizon", "must be at least 1"));
        }
        if self.run.trials < 1 {
            return Err(invalid("run.trials", "must be at least 1"));
        }
        if !(self.run.delta > 0.0 && self.run.delta < 1.0) {
            return Err(invalid("run.delta", "must lie strictly between 0 and 1"));
        }
        if self.run.checkpoint_ratio < 2 {
            return Err(invalid("run.checkpoint_ratio", "must be at least 2"));
        }
        if self.run.threads == Some(0) {
            return Err(invalid("run.threads", "must be positive when set"));
        }
        Ok(())
    }

    /// Environment description with run-derived fields filled in.
    fn resolved_env(&self) -> EnvSpec {
        let mut env = self.env.clone();
        if env.kind == EnvKind::Bandits && env.horizon_hint.is_none() {
            env.horizon_hint = Some(self.run.horizon);
        }
        env
    }
}

/// One trial's regret record.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub trial: u32,
    /// Geometric round grid, ending at the horizon.
    pub checkpoints: Vec<u64>,
    /// `t * gain - cumulative reward` at each checkpoint.
    pub cum_regret: Vec<f64>,
    /// Episodes started up to each checkpoint.
    pub episodes_at_checkpoint: Vec<u64>,
    /// Rounds t_k on which episodes began (within the horizon).
    pub episode_starts: Vec<u64>,
    pub total_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSummary {
    pub t: u64,
    pub mean_regret: f64,
    /// Sample standard deviation across trials; 0 for a single trial.
    pub std_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub algo: String,
    pub env: String,
    /// Optimal average reward of the true model.
    pub gain: f64,
    pub traces: Vec<RegretTrace>,
    pub summary: Vec<CheckpointSummary>,
}

fn checkpoint_grid(horizon: u64, ratio: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut t = 1u64;
    while t <= horizon {
        grid.push(t);
        match t.checked_mul(ratio) {
            Some(next) => t = next,
            None => break,
        }
    }
    if *grid.last().unwrap() != horizon {
        grid.push(horizon);
    }
    grid
}

fn run_trial_with_agent(
    cfg: &ExperimentConfig,
    trial: u32,
    mdp: &TabularMDP,
    gain: f64,
    mut agent: Box<dyn Agent>,
) -> Result<RegretTrace, HarnessError> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let (mut pair_streams, _) = make_streams(cfg.run.base_seed, trial, ns, na);
    let maps = if cfg.run.masking {
        masking_maps(cfg.run.base_seed, trial, ns, na)
    } else {
        MaskingMaps::identity(ns, na)
    };

    let checkpoints = checkpoint_grid(cfg.run.horizon, cfg.run.checkpoint_ratio);
    let mut cum_regret = Vec::with_capacity(checkpoints.len());
    let mut episodes_at_checkpoint = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0usize;
    let mut episode_starts = vec![1u64];
    let mut total_reward = 0.0;
    let mut state = mdp.initial_state();

    for t in 1..=cfg.run.horizon {
        let masked_state = maps.mask_state(state);
        let masked_action = agent.act(masked_state);
        let action = maps.unmask_action(masked_action);
        let (reward, next) = mdp.step(state, action, pair_streams.get_mut(state, action));
        total_reward += reward;
        let ended = agent
            .observe(masked_state, masked_action, reward, maps.mask_state(next))
            .map_err(|source| HarnessError::Agent { trial, source })?;
        if checkpoints[next_checkpoint] == t {
            cum_regret.push(t as f64 * gain - total_reward);
            episodes_at_checkpoint.push(episode_starts.len() as u64);
            next_checkpoint += 1;
        }
        if ended && t < cfg.run.horizon {
            episode_starts.push(t + 1);
        }
        state = next;
    }

    if cfg.algo.kind == AlgoKind::Ucrlv && cfg.run.horizon > (ns * na) as u64 {
        let bound = episode_bound(ns, na, cfg.run.horizon).expect("domain checked");
        let episodes = episode_starts.len() as u64;
        if episodes as f64 > bound {
            return Err(HarnessError::EpisodeBound {
                trial,
                episodes,
                bound,
                num_states: ns,
                num_actions: na,
                horizon: cfg.run.horizon,
            });
        }
    }

    Ok(RegretTrace {
        trial,
        checkpoints,
        cum_regret,
        episodes_at_checkpoint,
        episode_starts,
        total_reward,
    })
}

/// Runs a single trial end to end (environment, streams, agent, regret).
pub fn run_trial(cfg: &ExperimentConfig, trial: u32) -> Result<RegretTrace, HarnessError> {
    cfg.validate()?;
    let mdp = build_env(&cfg.resolved_env())?;
    let gain = optimal_gain(&mdp, 1e-9)?.gain;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let (_, agent_stream) = make_streams(cfg.run.base_seed, trial, ns, na);
    let agent = build_agent(&cfg.algo, ns, na, cfg.run.delta, agent_stream)
        .map_err(|source| HarnessError::Agent { trial, source })?;
    run_trial_with_agent(cfg, trial, &mdp, gain, agent)
}

fn summarize(traces: &[RegretTrace]) -> Vec<CheckpointSummary> {
    let checkpoints = &traces[0].checkpoints;
    checkpoints
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let n = traces.len() as f64;
            let mean = traces.iter().map(|tr| tr.cum_regret[i]).sum::<f64>() / n;
            let std = if traces.len() > 1 {
                let ss: f64 = traces
                    .iter()
                    .map(|tr| (tr.cum_regret[i] - mean).powi(2))
                    .sum();
                (ss / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            CheckpointSummary {
                t,
                mean_regret: mean,
                std_regret: std,
            }
        })
        .collect()
}

/// Runs all trials (in parallel when allowed) and aggregates per-checkpoint
/// means and standard deviations. Deterministic for a fixed config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let env_spec = cfg.resolved_env();
    let mdp = build_env(&env_spec)?;
    let gain = optimal_gain(&mdp, 1e-9)?.gain;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());

    let one = |trial: u32| -> Result<RegretTrace, HarnessError> {
        let (_, agent_stream) = make_streams(cfg.run.base_seed, trial, ns, na);
        let agent = build_agent(&cfg.algo, ns, na, cfg.run.delta, agent_stream)
            .map_err(|source| HarnessError::Agent { trial, source })?;
        run_trial_with_agent(cfg, trial, &mdp, gain, agent)
    };

    let traces: Result<Vec<RegretTrace>, HarnessError> = match cfg.run.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(|| (0..cfg.run.trials).into_par_iter().map(one).collect()),
        None => (0..cfg.run.trials).into_par_iter().map(one).collect(),
    };
    let traces = traces?;

    Ok(ExperimentResult {
        algo: cfg.algo.kind.label().to_string(),
        env: env_spec.label(),
        gain,
        summary: summarize(&traces),
        traces,
    })
}

/// One row of the diameter-times-states scaling sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DsSweepRow {
    pub algo: String,
    pub ds: u64,
    pub s: usize,
    pub d: f64,
    pub norm_regret: f64,
}

/// For each target `x`: pick `S ≈ x^(1/3)`, tune the success probability so
/// the diameter is `x / S` (expected hitting time of the chain is
/// `(S-1)/q`), validate the tuned diameter against the solver, run the
/// experiment, and normalize final regret by `sqrt(T ln T)`.
pub fn ds_sweep(
    cfg: &ExperimentConfig,
    ds_values: &[u64],
) -> Result<Vec<(DsSweepRow, ExperimentResult)>, HarnessError> {
    if cfg.env.kind != EnvKind::GameOfSkillV2 {
        return Err(invalid("env.kind", "ds sweeps run on the game_of_skill_v2 family").into());
    }
    let mut out = Vec::with_capacity(ds_values.len());
    for &ds in ds_values {
        let s = (ds as f64).powf(1.0 / 3.0).round().max(2.0) as usize;
        let d_target = ds as f64 / s as f64;
        let q = (s - 1) as f64 / d_target;
        if !(q > 0.0 && q <= 1.0) {
            return Err(HarnessError::Tuning {
                ds,
                reason: format!("tuned success probability {q} is outside (0, 1]"),
            });
        }
        let mut sweep_cfg = cfg.clone();
        sweep_cfg.env.chain_length = Some(s);
        sweep_cfg.env.success_prob = Some(q);
        let mdp = build_env(&sweep_cfg.resolved_env())?;
        let measured = diameter(&mdp, 1e-6)?;
        if (measured - d_target).abs() > 0.1 * d_target {
            return Err(HarnessError::Tuning {
                ds,
                reason: format!("measured diameter {measured:.3} misses target {d_target:.3} by more than 10%"),
            });
        }
        let mut result = run_experiment(&sweep_cfg)?;
        result.env = format!("{}[ds={}]", sweep_cfg.env.label(), ds);
        let t = cfg.run.horizon as f64;
        let final_mean = result.summary.last().expect("nonempty summary").mean_regret;
        let row = DsSweepRow {
            algo: result.algo.clone(),
            ds,
            s,
            d: measured,
            norm_regret: final_mean / (t * t.ln()).sqrt(),
        };
        out.push((row, result));
    }
    Ok(out)
}
