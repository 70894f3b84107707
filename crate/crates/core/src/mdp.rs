//! Tabular MDP model, benchmark environments, and exact solvers.
//!
//! The solvers here are ground-truth references: `optimal_gain` computes the
//! optimal average reward of the true model (used to score regret) and
//! `diameter` computes the worst-case expected travel time between states.
//! Both run on an aperiodicity-transformed ("lazy") model so they converge on
//! periodic chains; laziness preserves every policy's stationary distribution
//! and therefore its gain.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::Deserialize;
use thiserror::Error;

use crate::streams::Stream;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("value iteration did not converge within {iterations} sweeps (last span {last_span:.3e})")]
    NonConvergence { iterations: usize, last_span: f64 },
}

/// Reward distribution attached to one (state, action) pair. Supports are
/// all inside [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum RewardDist {
    Fixed(f64),
    Beta { alpha: f64, beta: f64 },
}

impl RewardDist {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardDist::Fixed(r) => r,
            RewardDist::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }

    /// Draws one reward. Deterministic rewards consume no randomness.
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match *self {
            RewardDist::Fixed(r) => r,
            RewardDist::Beta { alpha, beta } => {
                Beta::new(alpha, beta).expect("validated at construction").sample(rng)
            }
        }
    }
}

/// Dense tabular MDP with row-stochastic transition kernels.
#[derive(Debug, Clone)]
pub struct TabularMDP {
    num_states: usize,
    num_actions: usize,
    /// Flattened kernel, indexed by `(s * A + a) * S + s'`.
    transitions: Vec<f64>,
    rewards: Vec<RewardDist>,
    initial_state: usize,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl TabularMDP {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<RewardDist>,
        initial_state: usize,
    ) -> Result<Self, ConfigError> {
        if num_states == 0 || num_actions == 0 {
            return Err(invalid("num_states/num_actions", "must be at least 1"));
        }
        if transitions.len() != num_states * num_actions * num_states {
            return Err(invalid("transitions", "wrong number of entries"));
        }
        if rewards.len() != num_states * num_actions {
            return Err(invalid("rewards", "wrong number of entries"));
        }
        if initial_state >= num_states {
            return Err(invalid("initial_state", "out of range"));
        }
        for (i, row) in transitions.chunks_exact(num_states).enumerate() {
            let mut sum = 0.0;
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(
                        "transitions",
                        format!("entry outside [0, 1] in row {i}"),
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(invalid(
                    "transitions",
                    format!("row {i} sums to {sum}, expected 1"),
                ));
            }
        }
        for (i, r) in rewards.iter().enumerate() {
            match *r {
                RewardDist::Fixed(v) => {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(invalid("rewards", format!("entry {i} outside [0, 1]")));
                    }
                }
                RewardDist::Beta { alpha, beta } => {
                    if !(alpha > 0.0 && beta > 0.0) {
                        return Err(invalid(
                            "rewards",
                            format!("entry {i}: Beta parameters must be positive"),
                        ));
                    }
                }
            }
        }
        Ok(TabularMDP {
            num_states,
            num_actions,
            transitions,
            rewards,
            initial_state,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Transition row p(· | s, a).
    pub fn kernel(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.transitions[base..base + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> &RewardDist {
        &self.rewards[s * self.num_actions + a]
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.reward(s, a).mean()
    }

    /// Samples one environment step from the given stream: next state from
    /// the kernel (inverse CDF), then the reward.
    pub fn step(&self, s: usize, a: usize, rng: &mut Stream) -> (f64, usize) {
        let row = self.kernel(s, a);
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut next = self.num_states - 1;
        for (j, &p) in row.iter().enumerate() {
            cum += p;
            if u < cum {
                next = j;
                break;
            }
        }
        let reward = self.reward(s, a).sample(rng);
        (reward, next)
    }

    /// Returns the same MDP with states and actions relabeled;
    /// `state_perm[s]` / `action_perm[a]` give the new indices.
    pub fn relabeled(&self, state_perm: &[usize], action_perm: &[usize]) -> TabularMDP {
        let (ns, na) = (self.num_states, self.num_actions);
        let mut transitions = vec![0.0; ns * na * ns];
        let mut rewards = vec![RewardDist::Fixed(0.0); ns * na];
        for s in 0..ns {
            for a in 0..na {
                let (ms, ma) = (state_perm[s], action_perm[a]);
                rewards[ms * na + ma] = self.reward(s, a).clone();
                let row = self.kernel(s, a);
                for sp in 0..ns {
                    transitions[(ms * na + ma) * ns + state_perm[sp]] = row[sp];
                }
            }
        }
        TabularMDP {
            num_states: ns,
            num_actions: na,
            transitions,
            rewards,
            initial_state: state_perm[self.initial_state],
        }
    }
}

/// Benchmark environment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Riverswim,
    Bandits,
    GameOfSkillV1,
    GameOfSkillV2,
    Custom,
}

impl EnvKind {
    pub fn label(&self) -> &'static str {
        match self {
            EnvKind::Riverswim => "riverswim",
            EnvKind::Bandits => "bandits",
            EnvKind::GameOfSkillV1 => "game_of_skill_v1",
            EnvKind::GameOfSkillV2 => "game_of_skill_v2",
            EnvKind::Custom => "custom",
        }
    }
}

/// RiverSwim transition probabilities for the `right` action; every value can
/// be overridden from the config. `left` is always a deterministic step left.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiverSwimTransitions {
    pub interior_right: f64,
    pub interior_stay: f64,
    pub interior_left: f64,
    pub leftmost_right: f64,
    pub leftmost_stay: f64,
    pub rightmost_stay: f64,
    pub rightmost_left: f64,
}

impl Default for RiverSwimTransitions {
    fn default() -> Self {
        RiverSwimTransitions {
            interior_right: 0.3,
            interior_stay: 0.6,
            interior_left: 0.1,
            leftmost_right: 0.3,
            leftmost_stay: 0.7,
            rightmost_stay: 0.3,
            rightmost_left: 0.7,
        }
    }
}

impl RiverSwimTransitions {
    fn validate(&self) -> Result<(), ConfigError> {
        let rows: [(&str, &[f64]); 3] = [
            (
                "riverswim.interior",
                &[self.interior_right, self.interior_stay, self.interior_left],
            ),
            ("riverswim.leftmost", &[self.leftmost_right, self.leftmost_stay]),
            ("riverswim.rightmost", &[self.rightmost_stay, self.rightmost_left]),
        ];
        for (field, row) in rows {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(invalid(field, "probabilities must lie in [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(invalid(field, format!("probabilities sum to {sum}, expected 1")));
            }
        }
        Ok(())
    }
}

/// Fully explicit environment for `kind = "custom"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomEnv {
    /// `transitions[s][a][s']`
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Deterministic reward per `[s][a]`.
    pub rewards: Vec<Vec<f64>>,
    #[serde(default)]
    pub initial_state: usize,
}

/// Declarative environment description; unset fields fall back to the
/// published defaults of each family.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Number of chain states (RiverSwim, GameOfSkill).
    pub chain_length: Option<usize>,
    /// Probability that the `right` action advances (GameOfSkill).
    pub success_prob: Option<f64>,
    /// Reward of the leftmost state's reward-paying action.
    pub reward_left: Option<f64>,
    /// Reward of the rightmost state's reward-paying action.
    pub reward_right: Option<f64>,
    /// Run length the environment is allowed to depend on (Bandits uses it to
    /// set the stochastic arm's mean). The CLI fills it from the run horizon
    /// when absent.
    pub horizon_hint: Option<u64>,
    #[serde(default)]
    pub riverswim: RiverSwimTransitions,
    pub custom: Option<CustomEnv>,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> Self {
        EnvSpec {
            kind,
            chain_length: None,
            success_prob: None,
            reward_left: None,
            reward_right: None,
            horizon_hint: None,
            riverswim: RiverSwimTransitions::default(),
            custom: None,
        }
    }

    pub fn riverswim() -> Self {
        Self::new(EnvKind::Riverswim)
    }

    pub fn bandits(horizon: u64) -> Self {
        let mut s = Self::new(EnvKind::Bandits);
        s.horizon_hint = Some(horizon);
        s
    }

    pub fn game_of_skill_v1() -> Self {
        Self::new(EnvKind::GameOfSkillV1)
    }

    pub fn game_of_skill_v2() -> Self {
        Self::new(EnvKind::GameOfSkillV2)
    }

    pub fn label(&self) -> String {
        self.kind.label().to_string()
    }
}

const LEFT: usize = 0;
const RIGHT: usize = 1;

/// Instantiates a benchmark environment from its description.
pub fn build_env(spec: &EnvSpec) -> Result<TabularMDP, ConfigError> {
    match spec.kind {
        EnvKind::Riverswim => build_riverswim(spec),
        EnvKind::Bandits => build_bandits(spec),
        EnvKind::GameOfSkillV1 => build_game_of_skill(spec, false),
        EnvKind::GameOfSkillV2 => build_game_of_skill(spec, true),
        EnvKind::Custom => build_custom(spec),
    }
}

fn chain_length(spec: &EnvSpec, default: usize) -> Result<usize, ConfigError> {
    let n = spec.chain_length.unwrap_or(default);
    if n < 2 {
        return Err(invalid("chain_length", "chain needs at least 2 states"));
    }
    Ok(n)
}

fn checked_reward(field: &str, value: f64) -> Result<f64, ConfigError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(invalid(field, "reward must lie in [0, 1]"));
    }
    Ok(value)
}

/// Chain of states where swimming right against the current only sometimes
/// advances; a small sure reward on the far left competes with a larger one
/// on the far right.
fn build_riverswim(spec: &EnvSpec) -> Result<TabularMDP, ConfigError> {
    let n = chain_length(spec, 6)?;
    let r_left = checked_reward("reward_left", spec.reward_left.unwrap_or(0.208))?;
    let r_right = checked_reward("reward_right", spec.reward_right.unwrap_or(0.5))?;
    let tr = &spec.riverswim;
    tr.validate()?;

    let mut transitions = vec![0.0; n * 2 * n];
    let mut rewards = vec![RewardDist::Fixed(0.0); n * 2];
    let mut set = |s: usize, a: usize, sp: usize, p: f64| {
        transitions[(s * 2 + a) * n + sp] = p;
    };
    for s in 0..n {
        // Left always succeeds.
        set(s, LEFT, s.saturating_sub(1), 1.0);
        // Right fights the current.
        if s == 0 {
            set(s, RIGHT, 1, tr.leftmost_right);
            set(s, RIGHT, 0, tr.leftmost_stay);
        } else if s == n - 1 {
            set(s, RIGHT, n - 1, tr.rightmost_stay);
            set(s, RIGHT, n - 2, tr.rightmost_left);
        } else {
            set(s, RIGHT, s + 1, tr.interior_right);
            set(s, RIGHT, s, tr.interior_stay);
            set(s, RIGHT, s - 1, tr.interior_left);
        }
    }
    rewards[LEFT] = RewardDist::Fixed(r_left); // (state 0, left)
    rewards[(n - 1) * 2 + RIGHT] = RewardDist::Fixed(r_right);
    TabularMDP::new(n, 2, transitions, rewards, 0)
}

/// Single state, two arms: a Beta arm whose mean sits `horizon^(-1/4)` above
/// the deterministic arm's 0.8. The gap shrinks with the configured horizon,
/// which is what makes the instance hard at scale.
fn build_bandits(spec: &EnvSpec) -> Result<TabularMDP, ConfigError> {
    let horizon = spec.horizon_hint.ok_or_else(|| {
        invalid("horizon_hint", "bandits needs a horizon to set the stochastic arm")
    })? as f64;
    let edge = horizon.powf(-0.25);
    let (alpha, beta) = (0.8 + edge, 0.2 - edge);
    if beta <= 0.0 {
        return Err(invalid(
            "horizon_hint",
            "must exceed 625 so the Beta arm parameters stay positive",
        ));
    }
    let transitions = vec![1.0, 1.0]; // both arms self-loop
    let rewards = vec![RewardDist::Beta { alpha, beta }, RewardDist::Fixed(0.8)];
    TabularMDP::new(1, 2, transitions, rewards, 0)
}

/// Long chain where only a persistent (and rarely successful) push to the
/// right reaches the big reward; going left pays a decent sure reward, so the
/// left end is a trap for under-exploring algorithms. The v2 variant makes
/// the trap worse: `left` drops all the way back to the leftmost state.
fn build_game_of_skill(spec: &EnvSpec, reset_on_left: bool) -> Result<TabularMDP, ConfigError> {
    let n = chain_length(spec, 20)?;
    let q = spec.success_prob.unwrap_or(1.0 / 25.0);
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid("success_prob", "must lie in (0, 1]"));
    }
    let r_left = checked_reward("reward_left", spec.reward_left.unwrap_or(0.8))?;
    let r_right = checked_reward("reward_right", spec.reward_right.unwrap_or(0.9))?;

    let mut transitions = vec![0.0; n * 2 * n];
    let mut rewards = vec![RewardDist::Fixed(0.0); n * 2];
    let mut set = |s: usize, a: usize, sp: usize, p: f64| {
        transitions[(s * 2 + a) * n + sp] = p;
    };
    for s in 0..n {
        let left_target = if reset_on_left { 0 } else { s.saturating_sub(1) };
        set(s, LEFT, left_target, 1.0);
        if s == n - 1 {
            // Reward-paying action at the right end keeps the agent in place.
            set(s, RIGHT, s, 1.0);
        } else {
            set(s, RIGHT, s + 1, q);
            set(s, RIGHT, s, 1.0 - q);
        }
    }
    rewards[LEFT] = RewardDist::Fixed(r_left);
    rewards[(n - 1) * 2 + RIGHT] = RewardDist::Fixed(r_right);
    TabularMDP::new(n, 2, transitions, rewards, 0)
}

fn build_custom(spec: &EnvSpec) -> Result<TabularMDP, ConfigError> {
    let custom = spec
        .custom
        .as_ref()
        .ok_or_else(|| invalid("custom", "kind = \"custom\" requires a [env.custom] table"))?;
    let n = custom.transitions.len();
    if n == 0 {
        return Err(invalid("custom.transitions", "must have at least one state"));
    }
    let a = custom.transitions[0].len();
    let mut transitions = Vec::with_capacity(n * a * n);
    for (s, per_action) in custom.transitions.iter().enumerate() {
        if per_action.len() != a {
            return Err(invalid(
                "custom.transitions",
                format!("state {s} has {} actions, expected {a}", per_action.len()),
            ));
        }
        for row in per_action {
            if row.len() != n {
                return Err(invalid(
                    "custom.transitions",
                    format!("row in state {s} has {} entries, expected {n}", row.len()),
                ));
            }
            transitions.extend_from_slice(row);
        }
    }
    if custom.rewards.len() != n || custom.rewards.iter().any(|r| r.len() != a) {
        return Err(invalid("custom.rewards", "must be states x actions"));
    }
    let rewards = custom
        .rewards
        .iter()
        .flat_map(|row| row.iter().map(|&r| RewardDist::Fixed(r)))
        .collect();
    TabularMDP::new(n, a, transitions, rewards, custom.initial_state)
}

/// Result of a gain computation.
#[derive(Debug, Clone)]
pub struct GainReport {
    /// Optimal average reward; accurate to `tol / 2`.
    pub gain: f64,
    /// Relative value (bias) vector, normalized so its minimum is 0.
    pub bias: Vec<f64>,
    pub iterations: usize,
    /// Span of the last iterate difference (at most `tol`).
    pub residual_span: f64,
}

/// Expected-reward view of an MDP, also used for posterior samples.
pub(crate) struct DenseModel {
    pub num_states: usize,
    pub num_actions: usize,
    /// `(s * A + a) * S + s'`
    pub kernel: Vec<f64>,
    /// `s * A + a`
    pub rewards: Vec<f64>,
}

impl DenseModel {
    pub fn from_mdp(mdp: &TabularMDP) -> Self {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let mut kernel = Vec::with_capacity(ns * na * ns);
        let mut rewards = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                kernel.extend_from_slice(mdp.kernel(s, a));
                rewards.push(mdp.expected_reward(s, a));
            }
        }
        DenseModel {
            num_states: ns,
            num_actions: na,
            kernel,
            rewards,
        }
    }
}

/// Damping factor of the aperiodicity transform: each sweep mixes a 10%
/// chance of standing still into every action. Stationary distributions (and
/// hence gains) are unchanged; periodic chains become convergent.
const LAZY: f64 = 0.9;

pub(crate) const SOLVER_SWEEP_CAP: usize = 1_000_000;

/// Relative value iteration on the lazy model. Returns the gain report plus
/// a gain-optimal policy (greedy ties broken toward the lowest action index).
pub(crate) fn rvi_optimal(
    model: &DenseModel,
    tol: f64,
    cap: usize,
) -> Result<(GainReport, Vec<usize>), SolveError> {
    let (ns, na) = (model.num_states, model.num_actions);
    let mut u = vec![0.0; ns];
    let mut u_next = vec![0.0; ns];
    let mut policy = vec![0usize; ns];
    let mut last_span = f64::INFINITY;
    for it in 1..=cap {
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                let row = &model.kernel[(s * na + a) * ns..(s * na + a + 1) * ns];
                let mut dot = 0.0;
                for sp in 0..ns {
                    dot += row[sp] * u[sp];
                }
                let q = model.rewards[s * na + a] + LAZY * dot;
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            u_next[s] = best + (1.0 - LAZY) * u[s];
            policy[s] = best_a;
        }
        let mut dmin = f64::INFINITY;
        let mut dmax = f64::NEG_INFINITY;
        for s in 0..ns {
            let d = u_next[s] - u[s];
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        last_span = dmax - dmin;
        if last_span <= tol {
            let gain = 0.5 * (dmax + dmin);
            // Lazy bias is the true bias divided by the damping factor.
            let base = u_next.iter().cloned().fold(f64::INFINITY, f64::min);
            let bias = u_next.iter().map(|&v| (v - base) * LAZY).collect();
            return Ok((
                GainReport {
                    gain,
                    bias,
                    iterations: it,
                    residual_span: last_span,
                },
                policy,
            ));
        }
        // Renormalize to keep the iterate bounded.
        let base = u_next.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..ns {
            u[s] = u_next[s] - base;
        }
    }
    Err(SolveError::NonConvergence {
        iterations: cap,
        last_span,
    })
}

/// Average reward of a Markov chain (`kernel` is S x S, `rewards` per state).
pub(crate) fn chain_gain(
    kernel: &[f64],
    rewards: &[f64],
    tol: f64,
    cap: usize,
) -> Result<f64, SolveError> {
    let ns = rewards.len();
    debug_assert_eq!(kernel.len(), ns * ns);
    let mut u = vec![0.0; ns];
    let mut u_next = vec![0.0; ns];
    let mut last_span = f64::INFINITY;
    for _ in 1..=cap {
        for s in 0..ns {
            let mut dot = 0.0;
            for sp in 0..ns {
                dot += kernel[s * ns + sp] * u[sp];
            }
            u_next[s] = rewards[s] + LAZY * dot + (1.0 - LAZY) * u[s];
        }
        let mut dmin = f64::INFINITY;
        let mut dmax = f64::NEG_INFINITY;
        for s in 0..ns {
            let d = u_next[s] - u[s];
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        last_span = dmax - dmin;
        if last_span <= tol {
            return Ok(0.5 * (dmax + dmin));
        }
        let base = u_next.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..ns {
            u[s] = u_next[s] - base;
        }
    }
    Err(SolveError::NonConvergence {
        iterations: cap,
        last_span,
    })
}

/// Optimal average reward of a communicating MDP, accurate to `tol / 2`.
pub fn optimal_gain(mdp: &TabularMDP, tol: f64) -> Result<GainReport, SolveError> {
    let model = DenseModel::from_mdp(mdp);
    rvi_optimal(&model, tol, SOLVER_SWEEP_CAP).map(|(report, _)| report)
}

/// Greedy policy with respect to a bias vector on the true model; ties go to
/// the lowest action index.
pub fn greedy_policy(mdp: &TabularMDP, bias: &[f64]) -> Vec<usize> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut policy = vec![0usize; ns];
    for s in 0..ns {
        let mut best = f64::NEG_INFINITY;
        for a in 0..na {
            let row = mdp.kernel(s, a);
            let mut q = mdp.expected_reward(s, a);
            for sp in 0..ns {
                q += row[sp] * bias[sp];
            }
            if q > best {
                best = q;
                policy[s] = a;
            }
        }
    }
    policy
}

/// MDP diameter: the worst-case over ordered state pairs of the minimal
/// expected travel time. A single-state MDP has diameter 0 by convention.
/// Solved by value iteration on the expected-hitting-time fixed point
/// `h(s) = 1 + min_a sum_{s'' != target} p(s''|s,a) h(s'')`.
pub fn diameter(mdp: &TabularMDP, tol: f64) -> Result<f64, SolveError> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if ns == 1 {
        return Ok(0.0);
    }
    let mut overall: f64 = 0.0;
    let mut h = vec![0.0; ns];
    let mut h_next = vec![0.0; ns];
    for target in 0..ns {
        h.iter_mut().for_each(|v| *v = 0.0);
        let mut converged = false;
        let mut last_change = f64::INFINITY;
        for _ in 1..=SOLVER_SWEEP_CAP {
            let mut change: f64 = 0.0;
            for s in 0..ns {
                if s == target {
                    h_next[s] = 0.0;
                    continue;
                }
                let mut best = f64::INFINITY;
                for a in 0..na {
                    let row = mdp.kernel(s, a);
                    let mut exp = 0.0;
                    for sp in 0..ns {
                        if sp != target {
                            exp += row[sp] * h[sp];
                        }
                    }
                    best = best.min(exp);
                }
                h_next[s] = 1.0 + best;
                change = change.max((h_next[s] - h[s]).abs());
            }
            std::mem::swap(&mut h, &mut h_next);
            last_change = change;
            if change <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolveError::NonConvergence {
                iterations: SOLVER_SWEEP_CAP,
                last_span: last_change,
            });
        }
        for s in 0..ns {
            overall = overall.max(h[s]);
        }
    }
    Ok(overall)
}
