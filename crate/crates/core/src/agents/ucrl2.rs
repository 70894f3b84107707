//! Baseline optimistic learner with Hoeffding reward radii and an L1 ball
//! around the empirical transition row.

use super::{Agent, AgentError, AlgoParams};
use crate::confidence::CountsTable;
use crate::evi::{span, EVI_SWEEP_CAP};
use crate::mdp::SolveError;

pub struct Ucrl2Agent {
    delta: f64,
    reward_scale: f64,
    transition_scale: f64,
    counts: CountsTable,
    policy: Vec<usize>,
    gain_estimate: f64,
    episode_index: u64,
    episode_start_round: u64,
    round: u64,
    /// Total visit counts frozen at the start of the episode.
    snapshot: Vec<u64>,
}

/// `sqrt(scale * ln(2 S A t_k / delta) / (2 max(1, N)))`, before the cap at 1.
pub(crate) fn reward_radius(
    scale: f64,
    n: u64,
    t_k: u64,
    num_states: usize,
    num_actions: usize,
    delta: f64,
) -> f64 {
    let log = (2.0 * (num_states * num_actions) as f64 * t_k as f64 / delta).ln();
    (scale * log / (2.0 * n.max(1) as f64)).sqrt()
}

/// `sqrt(scale * S * ln(2 A t_k / delta) / max(1, N))`.
pub(crate) fn transition_budget(
    scale: f64,
    n: u64,
    t_k: u64,
    num_states: usize,
    num_actions: usize,
    delta: f64,
) -> f64 {
    let log = (2.0 * num_actions as f64 * t_k as f64 / delta).ln();
    (scale * num_states as f64 * log / n.max(1) as f64).sqrt()
}

/// Maximizes `p . u` over `||p - p_bar||_1 <= budget` on the simplex: push
/// half the budget onto the most valuable state, then strip the overflow from
/// the least valuable states upward. `order` sorts states by `u` descending.
fn l1_optimistic_row(p_bar: &[f64], order: &[usize], budget: f64, out: &mut [f64]) {
    out.copy_from_slice(p_bar);
    let best = order[0];
    out[best] = (p_bar[best] + 0.5 * budget).min(1.0);
    let mut total: f64 = out.iter().sum();
    for &j in order.iter().rev() {
        if total <= 1.0 {
            break;
        }
        let cut = (total - 1.0).min(out[j]);
        out[j] -= cut;
        total -= cut;
    }
    // Absorb float dust so the row is exactly stochastic.
    let total: f64 = out.iter().sum();
    out[best] += 1.0 - total;
}

struct Ucrl2Plan {
    policy: Vec<usize>,
    gain_estimate: f64,
}

fn plan(
    counts: &CountsTable,
    t_k: u64,
    delta: f64,
    reward_scale: f64,
    transition_scale: f64,
    epsilon: f64,
) -> Result<Ucrl2Plan, SolveError> {
    let (ns, na) = (counts.num_states(), counts.num_actions());
    let mut r_bound = vec![0.0; ns * na];
    let mut budget = vec![0.0; ns * na];
    let mut p_bar = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let pair = s * na + a;
            let n = counts.total_count(s, a);
            r_bound[pair] = (counts.reward_mean(s, a)
                + reward_radius(reward_scale, n, t_k, ns, na, delta))
            .min(1.0);
            budget[pair] = transition_budget(transition_scale, n, t_k, ns, na, delta);
            for sp in 0..ns {
                // Unvisited rows fall back to uniform; the budget is vacuous
                // there anyway.
                p_bar[pair * ns + sp] = if n == 0 {
                    1.0 / ns as f64
                } else {
                    counts.empirical_transition(s, a, sp)
                };
            }
        }
    }

    let mut u = vec![0.0; ns];
    let mut u_next = vec![0.0; ns];
    let mut policy = vec![0usize; ns];
    let mut order: Vec<usize> = (0..ns).collect();
    let mut row = vec![0.0; ns];
    let mut last_span = f64::INFINITY;
    for _ in 1..=EVI_SWEEP_CAP {
        order.sort_by(|&i, &j| u[j].partial_cmp(&u[i]).unwrap().then(i.cmp(&j)));
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let pair = s * na + a;
                l1_optimistic_row(&p_bar[pair * ns..(pair + 1) * ns], &order, budget[pair], &mut row);
                let q = r_bound[pair] + row.iter().zip(&u).map(|(p, u)| p * u).sum::<f64>();
                if q > best {
                    best = q;
                    policy[s] = a;
                }
            }
            u_next[s] = best;
        }
        let diff: Vec<f64> = u_next.iter().zip(&u).map(|(n, o)| n - o).collect();
        last_span = span(&diff);
        if last_span <= epsilon {
            let dmax = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let dmin = diff.iter().cloned().fold(f64::INFINITY, f64::min);
            return Ok(Ucrl2Plan {
                policy,
                gain_estimate: (0.5 * (dmax + dmin)).clamp(0.0, 1.0),
            });
        }
        let base = u_next.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..ns {
            u[s] = u_next[s] - base;
        }
    }
    Err(SolveError::NonConvergence {
        iterations: EVI_SWEEP_CAP,
        last_span,
    })
}

impl Ucrl2Agent {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        delta: f64,
        params: &AlgoParams,
    ) -> Result<Self, AgentError> {
        let mut agent = Ucrl2Agent {
            delta,
            reward_scale: params.ucrl2_reward_scale,
            transition_scale: params.ucrl2_transition_scale,
            counts: CountsTable::new(num_states, num_actions),
            policy: vec![0; num_states],
            gain_estimate: 0.0,
            episode_index: 0,
            episode_start_round: 0,
            round: 0,
            snapshot: vec![0; num_states * num_actions],
        };
        agent.replan(1)?;
        Ok(agent)
    }

    fn replan(&mut self, t_k: u64) -> Result<(), AgentError> {
        let epsilon = (1.0 / (t_k as f64).sqrt()).max(1e-9);
        let plan = plan(
            &self.counts,
            t_k,
            self.delta,
            self.reward_scale,
            self.transition_scale,
            epsilon,
        )
        .map_err(|source| AgentError::Planning {
            episode: self.episode_index + 1,
            round: t_k,
            source,
        })?;
        self.policy = plan.policy;
        self.gain_estimate = plan.gain_estimate;
        self.episode_index += 1;
        self.episode_start_round = t_k;
        self.snapshot.copy_from_slice(self.counts.total_counts());
        self.counts.reset_episode_counts();
        Ok(())
    }

    pub fn gain_estimate(&self) -> f64 {
        self.gain_estimate
    }

    pub fn episode_start_round(&self) -> u64 {
        self.episode_start_round
    }
}

impl Agent for Ucrl2Agent {
    fn name(&self) -> &'static str {
        "ucrl2"
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
        // Episode ends once the in-episode count of the played pair reaches
        // its start-of-episode total (clamped to 1).
        let pair = state * self.counts.num_actions() + action;
        if self.counts.episode_count(state, action) >= self.snapshot[pair].max(1) {
            self.replan(self.round + 1)?;
            return Ok(true);
        }
        Ok(false)
    }

    fn episodes_started(&self) -> u64 {
        self.episode_index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::{bernstein_radius, episode_confidence_levels};

    #[test]
    fn zero_counts_plan_is_fully_optimistic() {
        let agent = Ucrl2Agent::new(3, 2, 0.05, &AlgoParams::default()).unwrap();
        assert!((agent.gain_estimate() - 1.0).abs() < 1e-12);
        assert_eq!(agent.episodes_started(), 1);
    }

    #[test]
    fn saturated_budget_gives_point_mass_on_best_state() {
        let p_bar = [0.3, 0.2, 0.5];
        let u = [0.1, 0.9, 0.4];
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&i, &j| u[j].partial_cmp(&u[i]).unwrap());
        let mut out = [0.0; 3];
        l1_optimistic_row(&p_bar, &order, 2.0, &mut out);
        assert_eq!(out, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn small_budget_shifts_mass_from_worst_to_best() {
        let p_bar = [0.5, 0.5];
        let u = [0.0, 1.0];
        let order = vec![1, 0];
        let mut out = [0.0; 2];
        l1_optimistic_row(&p_bar, &order, 0.2, &mut out);
        assert!((out[1] - 0.6).abs() < 1e-15);
        assert!((out[0] - 0.4).abs() < 1e-15);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hoeffding_radius_dwarfs_variance_radius_on_constant_rewards() {
        // Same data: a zero-variance arm observed 10^4 times, planned at
        // t_k = 10^4 in a 6-state 2-action model with delta = 0.05.
        let (n, t_k, ns, na, delta) = (10_000u64, 10_000u64, 6, 2, 0.05);
        let hoeffding = reward_radius(7.0, n, t_k, ns, na, delta);
        assert!((hoeffding - 0.07337877258824477).abs() < 1e-12, "{hoeffding}");
        let levels = episode_confidence_levels(t_k, delta, ns, na);
        let variance_aware = bernstein_radius(0.0, n, levels.delta_r);
        assert!(
            (variance_aware - 0.0022823232623171556).abs() < 1e-12,
            "{variance_aware}"
        );
        assert!(hoeffding > 10.0 * variance_aware);
    }

    #[test]
    fn budgets_shrink_with_visits() {
        let b1 = transition_budget(14.0, 1, 100, 6, 2, 0.05);
        let b2 = transition_budget(14.0, 100, 100, 6, 2, 0.05);
        assert!(b1 > b2);
        assert!(b2 > 0.0);
    }

    #[test]
    fn episode_rule_doubles_the_played_pair() {
        let mut agent = Ucrl2Agent::new(2, 2, 0.05, &AlgoParams::default()).unwrap();
        let mut drive = |n: usize| -> Vec<bool> {
            (0..n).map(|_| agent.observe(0, 0, 0.5, 0).unwrap()).collect()
        };
        // Totals at episode ends: 1, 2, 4 — fourth episode starts at N = 4.
        assert_eq!(drive(4), [true, true, false, true]);
        assert_eq!(drive(4), [false, false, false, true]);
    }

    #[test]
    fn unseen_pair_ends_episode_immediately() {
        let mut agent = Ucrl2Agent::new(2, 2, 0.05, &AlgoParams::default()).unwrap();
        for _ in 0..3 {
            agent.observe(0, 0, 0.5, 0).unwrap();
        }
        assert!(agent.observe(1, 1, 0.5, 0).unwrap());
    }

    #[test]
    fn identical_observations_give_identical_behavior() {
        let params = AlgoParams::default();
        let mut a = Ucrl2Agent::new(3, 2, 0.05, &params).unwrap();
        let mut b = Ucrl2Agent::new(3, 2, 0.05, &params).unwrap();
        let obs = [(0, 1, 0.2, 1), (1, 0, 0.9, 2), (2, 1, 0.4, 0), (0, 0, 0.6, 2)];
        for &(s, act, r, sp) in obs.iter().cycle().take(40) {
            assert_eq!(a.act(s), b.act(s));
            assert_eq!(a.observe(s, act, r, sp).unwrap(), b.observe(s, act, r, sp).unwrap());
        }
        assert_eq!(a.episodes_started(), b.episodes_started());
    }

    #[test]
    fn well_separated_arms_resolve_to_the_better_one() {
        let mut agent = Ucrl2Agent::new(1, 2, 0.05, &AlgoParams::default()).unwrap();
        for _ in 0..4000 {
            agent.observe(0, 0, 0.1, 0).unwrap();
            agent.observe(0, 1, 0.9, 0).unwrap();
        }
        assert_eq!(agent.act(0), 1);
    }
}
