//! Tabular average-reward reinforcement learning with variance-based
//! optimism.
//!
//! The crate has three layers:
//!
//! * model plumbing — [`mdp`] (environments, gain/diameter solvers) and
//!   [`confidence`] (visit counts, empirical moments, Bernstein-style
//!   confidence bounds);
//! * algorithms — [`evi`] (extended value iteration over subset-constrained
//!   transition sets) and [`agents`] (the optimistic learner plus UCRL2 and
//!   posterior-sampling baselines);
//! * experiment machinery — [`harness`] (seeded streams, identifier masking,
//!   regret traces, diameter sweeps) and [`verify`] (brute-force oracles and
//!   closed-form bound checks used by the test suite and the CLI).

pub mod agents;
pub mod confidence;
pub mod evi;
pub mod harness;
pub mod mdp;
pub mod streams;
pub mod verify;

pub use agents::{build_agent, Agent, AgentError, AlgoKind, AlgoParams, AlgoSpec};
pub use confidence::{
    bernstein_radius, episode_confidence_levels, ConfidenceLevels, CountsTable, MomentAccumulator,
};
pub use evi::{
    evi_sweep, modified_extended_vi, optimistic_transition, span, OptimisticPlan, ValueVector,
};
pub use harness::{
    ds_sweep, run_experiment, run_trial, CheckpointSummary, DsSweepRow, ExperimentConfig,
    ExperimentResult, RegretTrace,
};
pub use mdp::{
    build_env, diameter, greedy_policy, optimal_gain, ConfigError, EnvKind, EnvSpec, GainReport,
    RewardDist, SolveError, TabularMDP,
};
pub use streams::{make_streams, masking_maps, MaskingMaps, Stream};
