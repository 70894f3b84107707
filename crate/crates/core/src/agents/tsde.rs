//! Posterior-sampling baseline with dynamically sized episodes.
//!
//! Rewards carry Beta(1/2, 1/2) posteriors and transitions Dirichlet(1/S)
//! posteriors. On replanning the sampled model uses the Beta posterior means
//! for rewards and one Dirichlet draw per (state, action) for transitions;
//! the sampled model is solved by relative value iteration.
//!
//! Rewards in (0, 1) are binarized for Beta conjugacy: an observation `r`
//! updates the posterior through an auxiliary coin of bias `r` drawn from the
//! agent's private stream, which preserves the posterior mean in expectation.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{Agent, AgentError, AlgoParams};
use crate::confidence::CountsTable;
use crate::mdp::{DenseModel, SolveError, SOLVER_SWEEP_CAP};
use crate::streams::Stream;

const SAMPLED_MODEL_TOL: f64 = 1e-4;

pub struct TsdeAgent {
    counts: CountsTable,
    /// Beta posterior parameters per (s, a).
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Dirichlet posterior parameters, `(s * A + a) * S + s'`.
    dirichlet: Vec<f64>,
    policy: Vec<usize>,
    rng: Stream,
    length_rule: bool,
    doubling_rule: bool,
    episode_index: u64,
    episode_len: u64,
    prev_episode_len: u64,
    /// Total visit counts frozen at the start of the episode.
    snapshot: Vec<u64>,
    round: u64,
}

impl TsdeAgent {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        params: &AlgoParams,
        rng: Stream,
    ) -> Result<Self, AgentError> {
        let pairs = num_states * num_actions;
        let mut agent = TsdeAgent {
            counts: CountsTable::new(num_states, num_actions),
            alpha: vec![0.5; pairs],
            beta: vec![0.5; pairs],
            dirichlet: vec![1.0 / num_states as f64; pairs * num_states],
            policy: vec![0; num_states],
            rng,
            length_rule: params.tsde_length_rule,
            doubling_rule: params.tsde_doubling_rule,
            episode_index: 0,
            episode_len: 0,
            prev_episode_len: 0,
            snapshot: vec![0; pairs],
            round: 0,
        };
        agent.replan()?;
        Ok(agent)
    }

    /// One Dirichlet draw: independent Gamma(param, 1) variates, normalized.
    fn sample_row(&mut self, pair: usize, out: &mut [f64]) {
        let ns = self.counts.num_states();
        if ns == 1 {
            out[0] = 1.0;
            return;
        }
        let mut total = 0.0;
        for sp in 0..ns {
            let shape = self.dirichlet[pair * ns + sp];
            let g = Gamma::new(shape, 1.0).expect("posterior parameters stay positive");
            let x: f64 = g.sample(&mut self.rng);
            out[sp] = x;
            total += x;
        }
        if total > 0.0 && total.is_finite() {
            for x in out.iter_mut() {
                *x /= total;
            }
        } else {
            // All Gamma draws underflowed (possible for tiny shapes).
            out.fill(1.0 / ns as f64);
        }
    }

    fn replan(&mut self) -> Result<(), AgentError> {
        let (ns, na) = (self.counts.num_states(), self.counts.num_actions());
        let mut kernel = vec![0.0; ns * na * ns];
        let mut rewards = vec![0.0; ns * na];
        for pair in 0..ns * na {
            rewards[pair] = self.alpha[pair] / (self.alpha[pair] + self.beta[pair]);
            self.sample_row(pair, &mut kernel[pair * ns..(pair + 1) * ns]);
        }
        let model = DenseModel {
            num_states: ns,
            num_actions: na,
            kernel,
            rewards,
        };
        let (_, policy) = crate::mdp::rvi_optimal(&model, SAMPLED_MODEL_TOL, SOLVER_SWEEP_CAP)
            .map_err(|source: SolveError| AgentError::Planning {
                episode: self.episode_index + 1,
                round: self.round + 1,
                source,
            })?;
        self.policy = policy;
        self.episode_index += 1;
        Ok(())
    }

    pub fn reward_posterior(&self, s: usize, a: usize) -> (f64, f64) {
        let pair = s * self.counts.num_actions() + a;
        (self.alpha[pair], self.beta[pair])
    }

    pub fn transition_posterior(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.counts.num_states();
        let pair = s * self.counts.num_actions() + a;
        &self.dirichlet[pair * ns..(pair + 1) * ns]
    }
}

impl Agent for TsdeAgent {
    fn name(&self) -> &'static str {
        "tsde"
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
        self.episode_len += 1;
        let ns = self.counts.num_states();
        let pair = state * self.counts.num_actions() + action;
        if self.rng.gen_bool(reward) {
            self.alpha[pair] += 1.0;
        } else {
            self.beta[pair] += 1.0;
        }
        self.dirichlet[pair * ns + next_state] += 1.0;

        let length_exceeded = self.length_rule && self.episode_len > self.prev_episode_len;
        let count_doubled = self.doubling_rule
            && self.counts.total_count(state, action) > 2 * self.snapshot[pair];
        if length_exceeded || count_doubled {
            self.prev_episode_len = self.episode_len;
            self.episode_len = 0;
            self.snapshot.copy_from_slice(self.counts.total_counts());
            self.replan()?;
            return Ok(true);
        }
        Ok(false)
    }

    fn episodes_started(&self) -> u64 {
        self.episode_index
    }
}
