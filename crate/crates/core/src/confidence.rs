//! Visit counts, running moments, and empirical-variance confidence bounds.
//!
//! The transition bound is subset-based: for any set of next states, the
//! plausible probability mass is the empirical mass plus a Bernstein radius
//! driven by the Bernoulli variance `p(1-p)` of that mass. Tracking the
//! aggregated mass (rather than per-next-state statistics) keeps the
//! bookkeeping at O(S A) values and makes the subset bound a concave
//! function of the empirical mass, which is what the planner's greedy
//! assignment relies on.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("observed reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),
}

/// Online mean/variance accumulator (Welford). `variance` uses the
/// population convention (divide by the count).
#[derive(Debug, Clone, Default)]
pub struct MomentAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// 0 while empty.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (0 while empty).
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }
}

/// Confidence levels in force during one episode.
#[derive(Debug, Clone, Copy)]
pub struct ConfidenceLevels {
    pub delta_r: f64,
    pub delta_p: f64,
    pub t_k: u64,
}

/// Per-episode failure probabilities: the overall budget `delta` is split
/// across rewards and transition subsets and shrunk by `max(1, ln t_k)` so a
/// union bound over episodes goes through.
pub fn episode_confidence_levels(
    t_k: u64,
    delta: f64,
    num_states: usize,
    num_actions: usize,
) -> ConfidenceLevels {
    let s = num_states as f64;
    let a = num_actions as f64;
    let l = (t_k as f64).ln().max(1.0);
    ConfidenceLevels {
        delta_r: delta / (4.0 * s * a * l),
        delta_p: delta / (8.0 * s * s * a * l),
        t_k,
    }
}

/// Empirical-Bernstein deviation radius at failure probability `delta_f`:
/// `min(1, sqrt(2 var ln(2/delta_f) / n) + (7/3) ln(2/delta_f) / (n - 1))`.
/// With fewer than two samples there is no information, so the radius is 1
/// (bounds on [0, 1] quantities stay vacuous-but-valid).
pub fn bernstein_radius(variance: f64, n: u64, delta_f: f64) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let l = (2.0 / delta_f).ln();
    let n = n as f64;
    let r = (2.0 * variance * l / n).sqrt() + (7.0 / 3.0) * l / (n - 1.0);
    r.min(1.0)
}

/// Upper confidence bound on a probability mass given its empirical value.
pub(crate) fn bound_from_mass(p_bar: f64, n: u64, delta_p: f64) -> f64 {
    p_bar + bernstein_radius(p_bar * (1.0 - p_bar), n, delta_p)
}

/// All sufficient statistics one learner keeps, per (state, action) pair:
/// lifetime and in-episode visit counts, reward moments, and next-state
/// counts.
#[derive(Debug, Clone)]
pub struct CountsTable {
    num_states: usize,
    num_actions: usize,
    total: Vec<u64>,
    episode: Vec<u64>,
    reward: Vec<MomentAccumulator>,
    next: Vec<u64>,
}

impl CountsTable {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        let pairs = num_states * num_actions;
        CountsTable {
            num_states,
            num_actions,
            total: vec![0; pairs],
            episode: vec![0; pairs],
            reward: vec![MomentAccumulator::default(); pairs],
            next: vec![0; pairs * num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn pair(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    pub fn record_transition(
        &mut self,
        s: usize,
        a: usize,
        reward: f64,
        next: usize,
    ) -> Result<(), DataError> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(DataError::RewardOutOfRange(reward));
        }
        let p = self.pair(s, a);
        self.total[p] += 1;
        self.episode[p] += 1;
        self.reward[p].push(reward);
        self.next[p * self.num_states + next] += 1;
        Ok(())
    }

    /// Lifetime count N_t(s, a).
    pub fn total_count(&self, s: usize, a: usize) -> u64 {
        self.total[self.pair(s, a)]
    }

    /// In-episode count N_k(s, a).
    pub fn episode_count(&self, s: usize, a: usize) -> u64 {
        self.episode[self.pair(s, a)]
    }

    pub fn reset_episode_counts(&mut self) {
        self.episode.iter_mut().for_each(|c| *c = 0);
    }

    pub fn total_counts(&self) -> &[u64] {
        &self.total
    }

    pub fn next_count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.next[self.pair(s, a) * self.num_states + next]
    }

    pub(crate) fn next_counts_row(&self, s: usize, a: usize) -> &[u64] {
        let base = self.pair(s, a) * self.num_states;
        &self.next[base..base + self.num_states]
    }

    /// Empirical transition probability (0 while the pair is unvisited).
    pub fn empirical_transition(&self, s: usize, a: usize, next: usize) -> f64 {
        let n = self.total_count(s, a);
        if n == 0 {
            0.0
        } else {
            self.next_count(s, a, next) as f64 / n as f64
        }
    }

    pub fn reward_mean(&self, s: usize, a: usize) -> f64 {
        self.reward[self.pair(s, a)].mean()
    }

    pub fn reward_variance(&self, s: usize, a: usize) -> f64 {
        self.reward[self.pair(s, a)].variance()
    }

    /// Upper confidence bound on the probability of jumping into `subset`
    /// from (s, a): empirical mass plus the Bernstein radius of its
    /// Bernoulli variance. With no observations the bound is 1 for every
    /// subset (vacuous optimism).
    pub fn subset_upper_bound(
        &self,
        s: usize,
        a: usize,
        subset: &[usize],
        levels: &ConfidenceLevels,
    ) -> f64 {
        let n = self.total_count(s, a);
        let p_bar = if n == 0 {
            0.0
        } else {
            let mass: u64 = subset.iter().map(|&sp| self.next_count(s, a, sp)).sum();
            mass as f64 / n as f64
        };
        bound_from_mass(p_bar, n, levels.delta_p)
    }

    /// Optimistic mean reward `min(1, mean + radius)`.
    pub fn reward_upper_bound(&self, s: usize, a: usize, levels: &ConfidenceLevels) -> f64 {
        let acc = &self.reward[self.pair(s, a)];
        let bound = acc.mean() + bernstein_radius(acc.variance(), acc.count(), levels.delta_r);
        bound.min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_record() {
        let mut t = CountsTable::new(3, 2);
        t.record_transition(0, 1, 0.5, 2).unwrap();
        assert_eq!(t.total_count(0, 1), 1);
        assert_eq!(t.episode_count(0, 1), 1);
        assert_eq!(t.reward_mean(0, 1), 0.5);
        assert_eq!(t.next_count(0, 1, 2), 1);
        assert_eq!(t.total_count(0, 0), 0);
    }

    #[test]
    fn two_rewards_population_variance() {
        let mut t = CountsTable::new(2, 1);
        t.record_transition(0, 0, 0.0, 1).unwrap();
        t.record_transition(0, 0, 1.0, 1).unwrap();
        assert!((t.reward_mean(0, 0) - 0.5).abs() < 1e-15);
        assert!((t.reward_variance(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn welford_matches_two_pass_batch() {
        // Independent batch oracle: two-pass mean then squared deviations.
        let mut rng = crate::streams::Stream::seed_from_u64(5);
        let values: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let mut acc = MomentAccumulator::default();
        for &v in &values {
            acc.push(v);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert!((acc.mean() - mean).abs() < 1e-10);
        assert!((acc.variance() - var).abs() < 1e-10);
    }

    #[test]
    fn reward_out_of_range_is_rejected() {
        let mut t = CountsTable::new(2, 1);
        assert!(t.record_transition(0, 0, 1.5, 0).is_err());
        assert!(t.record_transition(0, 0, -0.1, 0).is_err());
    }

    #[test]
    fn episode_reset() {
        let mut t = CountsTable::new(2, 1);
        for _ in 0..3 {
            t.record_transition(1, 0, 0.0, 0).unwrap();
        }
        assert_eq!(t.episode_count(1, 0), 3);
        t.reset_episode_counts();
        assert_eq!(t.episode_count(1, 0), 0);
        assert_eq!(t.total_count(1, 0), 3);
    }

    #[test]
    fn confidence_levels_examples() {
        // t_k = 1: the log factor clamps to 1.
        let l = episode_confidence_levels(1, 0.05, 6, 2);
        assert!((l.delta_r - 0.05 / 48.0).abs() < 1e-15);
        assert!((l.delta_p - 0.05 / (8.0 * 36.0 * 2.0)).abs() < 1e-15);
        // t_k = 3 (close to e, ln just above 1): delta_r just below 0.05/48.
        let l3 = episode_confidence_levels(3, 0.05, 6, 2);
        assert!(l3.delta_r < 0.05 / 48.0);
        assert!((l3.delta_r - 0.05 / (48.0 * (3.0f64).ln())).abs() < 1e-15);
    }

    #[test]
    fn confidence_levels_monotone_in_time() {
        let mut last = f64::INFINITY;
        for t_k in [1u64, 2, 10, 100, 10_000, 1 << 24] {
            let l = episode_confidence_levels(t_k, 0.05, 6, 2);
            assert!(l.delta_r <= last + 1e-18);
            last = l.delta_r;
        }
    }

    #[test]
    fn radius_with_no_information_is_one() {
        assert_eq!(bernstein_radius(0.0, 0, 0.05), 1.0);
        assert_eq!(bernstein_radius(0.3, 1, 0.05), 1.0);
    }

    #[test]
    fn radius_frozen_value() {
        // High-precision evaluation of
        // sqrt(2 * 0.25 * ln(40) / 100) + (7/3) * ln(40) / 99.
        let r = bernstein_radius(0.25, 100, 0.05);
        assert!((r - 0.222753438371360).abs() < 1e-12, "radius {r}");
    }

    #[test]
    fn radius_shrinks_to_zero_with_data() {
        // At n = 2 the correction term still clamps to 1; shrinkage is
        // strict from n = 10 on.
        assert_eq!(bernstein_radius(0.0, 2, 0.05), 1.0);
        let mut last = 1.0;
        for n in [10u64, 100, 10_000, 1_000_000, 100_000_000] {
            let r = bernstein_radius(0.0, n, 0.05);
            assert!(r < last);
            last = r;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn subset_bound_examples() {
        let mut t = CountsTable::new(3, 1);
        // 100 visits, 50 of them into state 1.
        for i in 0..100 {
            t.record_transition(0, 0, 0.0, if i < 50 { 1 } else { 2 }).unwrap();
        }
        let levels = ConfidenceLevels {
            delta_r: 0.1,
            delta_p: 0.1,
            t_k: 1,
        };
        let b = t.subset_upper_bound(0, 0, &[1], &levels);
        // 0.5 + radius(0.25, 100, 0.1); radius frozen by direct evaluation.
        assert!((b - (0.5 + 0.192993826095919)).abs() < 1e-12, "bound {b}");
        // Empty subset: radius-only value with zero variance.
        let e = t.subset_upper_bound(0, 0, &[], &levels);
        assert!((e - bernstein_radius(0.0, 100, 0.1)).abs() < 1e-15);
        // Full set: at least 1.
        let f = t.subset_upper_bound(0, 0, &[0, 1, 2], &levels);
        assert!(f >= 1.0);
    }

    #[test]
    fn subset_bound_unvisited_pair_is_vacuous() {
        let t = CountsTable::new(3, 1);
        let levels = ConfidenceLevels {
            delta_r: 0.1,
            delta_p: 0.1,
            t_k: 1,
        };
        for subset in [&[][..], &[0][..], &[0, 2][..]] {
            assert_eq!(t.subset_upper_bound(0, 0, subset, &levels), 1.0);
        }
    }

    #[test]
    fn reward_bound_examples() {
        let levels = ConfidenceLevels {
            delta_r: 0.05,
            delta_p: 0.05,
            t_k: 1,
        };
        let t = CountsTable::new(1, 1);
        assert_eq!(t.reward_upper_bound(0, 0, &levels), 1.0, "no data: vacuous");

        let mut t = CountsTable::new(1, 1);
        for _ in 0..10_000 {
            t.record_transition(0, 0, 0.5, 0).unwrap();
        }
        let b = t.reward_upper_bound(0, 0, &levels);
        // Zero variance: only the (7/3) ln(40) / 9999 term remains.
        assert!((b - 0.500860824621755).abs() < 1e-12, "bound {b}");
        assert!(b > 0.5 && b < 0.51);
    }

    #[test]
    fn reward_bound_stays_in_range() {
        let mut rng = crate::streams::Stream::seed_from_u64(3);
        let levels = ConfidenceLevels {
            delta_r: 0.01,
            delta_p: 0.01,
            t_k: 5,
        };
        for _ in 0..50 {
            let mut t = CountsTable::new(1, 1);
            let n = rng.gen_range(0..200);
            for _ in 0..n {
                t.record_transition(0, 0, rng.gen::<f64>(), 0).unwrap();
            }
            let b = t.reward_upper_bound(0, 0, &levels);
            assert!(b >= t.reward_mean(0, 0) - 1e-15);
            assert!(b <= 1.0);
        }
    }
}
