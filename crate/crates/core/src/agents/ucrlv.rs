//! The variance-aware optimistic learner.

use super::{Agent, AgentError};
use crate::confidence::{episode_confidence_levels, CountsTable};
use crate::evi::modified_extended_vi;

/// Episode-end threshold for `Σ N_k(s,a) / max(1, N_{t_k}(s,a))`, backed off
/// by one part in 10^9 so an exact sum of unit fractions cannot miss on
/// floating-point dust.
const DOUBLING_THRESHOLD: f64 = 1.0 - 1e-9;

pub struct UcrlVAgent {
    delta: f64,
    counts: CountsTable,
    policy: Vec<usize>,
    gain_estimate: f64,
    /// k; 1 after construction.
    episode_index: u64,
    /// t_k: the round on which the current episode began.
    episode_start_round: u64,
    /// Observations consumed so far (the current round is `round + 1`).
    round: u64,
    /// Total visit counts frozen at the start of the episode.
    snapshot: Vec<u64>,
    /// Running value of the episode-end statistic.
    doubling_sum: f64,
}

impl UcrlVAgent {
    pub fn new(num_states: usize, num_actions: usize, delta: f64) -> Result<Self, AgentError> {
        let mut agent = UcrlVAgent {
            delta,
            counts: CountsTable::new(num_states, num_actions),
            policy: vec![0; num_states],
            gain_estimate: 0.0,
            episode_index: 0,
            episode_start_round: 0,
            round: 0,
            snapshot: vec![0; num_states * num_actions],
            doubling_sum: 0.0,
        };
        agent.replan(1)?;
        Ok(agent)
    }

    /// Recomputes the optimistic policy for an episode starting at `t_k`,
    /// snapshots the visit counts, and resets the episode statistic.
    fn replan(&mut self, t_k: u64) -> Result<(), AgentError> {
        let levels = episode_confidence_levels(
            t_k,
            self.delta,
            self.counts.num_states(),
            self.counts.num_actions(),
        );
        let epsilon = (1.0 / (t_k as f64).sqrt()).max(1e-9);
        let plan = modified_extended_vi(&self.counts, &levels, epsilon).map_err(|source| {
            AgentError::Planning {
                episode: self.episode_index + 1,
                round: t_k,
                source,
            }
        })?;
        self.policy = plan.policy;
        self.gain_estimate = plan.gain_estimate;
        self.episode_index += 1;
        self.episode_start_round = t_k;
        self.snapshot.copy_from_slice(self.counts.total_counts());
        self.counts.reset_episode_counts();
        self.doubling_sum = 0.0;
        Ok(())
    }

    /// `Σ_{s,a} N_k(s,a) / max(1, N_{t_k}(s,a))`, maintained incrementally.
    pub fn doubling_statistic(&self) -> f64 {
        self.doubling_sum
    }

    pub fn episode_should_end(&self) -> bool {
        self.doubling_sum >= DOUBLING_THRESHOLD
    }

    pub fn episode_start_round(&self) -> u64 {
        self.episode_start_round
    }

    /// Optimistic gain of the current plan.
    pub fn gain_estimate(&self) -> f64 {
        self.gain_estimate
    }
}

impl Agent for UcrlVAgent {
    fn name(&self) -> &'static str {
        "ucrlv"
    }

    fn act(&self, state: usize) -> usize {
        self.policy[state]
    }

    fn observe(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
    ) -> Result<bool, AgentError> {
        self.counts
            .record_transition(state, action, reward, next_state)?;
        self.round += 1;
        let pair = state * self.counts.num_actions() + action;
        self.doubling_sum += 1.0 / self.snapshot[pair].max(1) as f64;
        if self.episode_should_end() {
            self.replan(self.round + 1)?;
            return Ok(true);
        }
        Ok(false)
    }

    fn episodes_started(&self) -> u64 {
        self.episode_index
    }
}
