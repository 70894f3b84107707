//! Brute-force oracles and closed-form bound formulas.
//!
//! Everything here exists to catch the planner lying: the checks enumerate
//! subsets or grid points exhaustively instead of trusting the greedy
//! assignment, so they are only usable for small state spaces. The CLI's
//! `verify` command and the acceptance tests drive these, including negative
//! controls that corrupt an input and demand the check fails.

use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::confidence::{ConfidenceLevels, CountsTable};
use crate::evi::optimistic_transition;
use crate::streams::Stream;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{what} supports at most {max} states, got {got}")]
    TooManyStates {
        what: &'static str,
        max: usize,
        got: usize,
    },
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },
}

fn domain(field: &'static str, reason: impl Into<String>) -> VerifyError {
    VerifyError::Domain {
        field,
        reason: reason.into(),
    }
}

const FEASIBILITY_TOL: f64 = 1e-12;

/// Checks `p` against the upper bound of every one of the `2^S` subsets.
pub fn check_all_subsets(
    p: &[f64],
    table: &CountsTable,
    s: usize,
    a: usize,
    levels: &ConfidenceLevels,
) -> Result<bool, VerifyError> {
    let ns = table.num_states();
    if ns > 20 {
        return Err(VerifyError::TooManyStates {
            what: "check_all_subsets",
            max: 20,
            got: ns,
        });
    }
    let mut subset = Vec::with_capacity(ns);
    for mask in 0u32..(1u32 << ns) {
        subset.clear();
        let mut mass = 0.0;
        for sp in 0..ns {
            if mask & (1 << sp) != 0 {
                subset.push(sp);
                mass += p[sp];
            }
        }
        if mass > table.subset_upper_bound(s, a, &subset, levels) + FEASIBILITY_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive grid maximization of `p . u` over the plausible polytope.
/// Enumerates every distribution on a `grid_step` lattice, keeps the
/// feasible ones, and also tries the (always feasible) empirical row, so the
/// result lower-bounds the true maximum to within the grid resolution.
pub fn inner_max_oracle(
    u: &[f64],
    table: &CountsTable,
    s: usize,
    a: usize,
    levels: &ConfidenceLevels,
    grid_step: f64,
) -> Result<f64, VerifyError> {
    let ns = table.num_states();
    if ns > 4 {
        return Err(VerifyError::TooManyStates {
            what: "inner_max_oracle",
            max: 4,
            got: ns,
        });
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(domain("grid_step", "must lie in (0, 0.5]"));
    }
    let m = (1.0 / grid_step).round() as u64;

    let mut bounds = vec![0.0; 1 << ns];
    let mut subset = Vec::with_capacity(ns);
    for mask in 0u32..(1u32 << ns) {
        subset.clear();
        for sp in 0..ns {
            if mask & (1 << sp) != 0 {
                subset.push(sp);
            }
        }
        bounds[mask as usize] = table.subset_upper_bound(s, a, &subset, levels);
    }

    // The empirical row is always inside the polytope.
    let n = table.total_count(s, a);
    let mut best = if n > 0 {
        (0..ns)
            .map(|sp| table.next_count(s, a, sp) as f64 / n as f64 * u[sp])
            .sum()
    } else {
        f64::NEG_INFINITY
    };

    // Masks become fully determined once their highest state is assigned.
    let mut masks_by_top: Vec<Vec<u32>> = vec![Vec::new(); ns];
    for mask in 1u32..(1u32 << ns) {
        let top = (31 - mask.leading_zeros()) as usize;
        masks_by_top[top].push(mask);
    }

    let mut units = vec![0u64; ns];
    fn recurse(
        depth: usize,
        remaining: u64,
        value: f64,
        units: &mut [u64],
        u: &[f64],
        m: u64,
        bounds: &[f64],
        masks_by_top: &[Vec<u32>],
        best: &mut f64,
    ) {
        let ns = units.len();
        let last = depth == ns - 1;
        let choices = if last { remaining..=remaining } else { 0..=remaining };
        for c in choices {
            units[depth] = c;
            let mut ok = true;
            for &mask in &masks_by_top[depth] {
                let mut mass_units = 0u64;
                for sp in 0..=depth {
                    if mask & (1 << sp) != 0 {
                        mass_units += units[sp];
                    }
                }
                if mass_units as f64 / m as f64 > bounds[mask as usize] + FEASIBILITY_TOL {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let value = value + c as f64 / m as f64 * u[depth];
            if last {
                if value > *best {
                    *best = value;
                }
            } else {
                recurse(
                    depth + 1,
                    remaining - c,
                    value,
                    units,
                    u,
                    m,
                    bounds,
                    masks_by_top,
                    best,
                );
            }
        }
        units[depth] = 0;
    }
    recurse(0, m, 0.0, &mut units, u, m, &bounds, &masks_by_top, &mut best);
    Ok(best)
}

/// Exhaustively checks that a set function on subset masks has diminishing
/// marginal gains: for all A subset of B and x outside B,
/// `f(A + x) - f(A) >= f(B + x) - f(B)`.
pub fn check_submodularity_with(num_states: usize, f: impl Fn(u32) -> f64) -> bool {
    let full = 1u32 << num_states;
    let values: Vec<f64> = (0..full).map(&f).collect();
    for b in 0..full {
        // Enumerate subsets a of b.
        let mut a = b;
        loop {
            for x in 0..num_states {
                let bit = 1u32 << x;
                if b & bit == 0 {
                    let lhs = values[(a | bit) as usize] - values[a as usize];
                    let rhs = values[(b | bit) as usize] - values[b as usize];
                    if lhs < rhs - FEASIBILITY_TOL {
                        return false;
                    }
                }
            }
            if a == 0 {
                break;
            }
            a = (a - 1) & b;
        }
    }
    true
}

/// Submodularity of the subset upper bound for one (state, action) pair.
pub fn check_submodularity(
    table: &CountsTable,
    s: usize,
    a: usize,
    levels: &ConfidenceLevels,
) -> Result<bool, VerifyError> {
    let ns = table.num_states();
    if ns > 6 {
        return Err(VerifyError::TooManyStates {
            what: "check_submodularity",
            max: 6,
            got: ns,
        });
    }
    Ok(check_submodularity_with(ns, |mask| {
        let mut members = Vec::with_capacity(ns);
        for sp in 0..ns {
            if mask & (1 << sp) != 0 {
                members.push(sp);
            }
        }
        table.subset_upper_bound(s, a, &members, levels)
    }))
}

/// The two printed terms of the high-probability regret bound.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    /// `2^10 sqrt(D T S A min(ln(D+1), S) ln(8T/SA) ln(BS/delta))`
    pub sqrt_term: f64,
    /// `64 D S A ln(8T/SA) ln(B/delta)`
    pub linear_term: f64,
}

impl BoundReport {
    pub fn total(&self) -> f64 {
        self.sqrt_term + self.linear_term
    }
}

/// Evaluates the regret bound with constants exactly as printed, with
/// `B = 32 S A ln T`. Diagnostic only: the constants are astronomically
/// loose compared to measured regret.
pub fn theoretical_regret_bound(
    diameter: f64,
    num_states: usize,
    num_actions: usize,
    horizon: u64,
    delta: f64,
) -> Result<BoundReport, VerifyError> {
    if !(diameter > 0.0) {
        return Err(domain("diameter", "must be positive"));
    }
    if num_states == 0 || num_actions == 0 {
        return Err(domain("num_states/num_actions", "must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", "must lie in (0, 1)"));
    }
    let (d, t) = (diameter, horizon as f64);
    let (s, a) = (num_states as f64, num_actions as f64);
    if t <= s * a {
        return Err(domain("horizon", "must exceed num_states * num_actions"));
    }
    let b = 32.0 * s * a * t.ln();
    let log_t = (8.0 * t / (s * a)).ln();
    let sqrt_term = 1024.0
        * (d * t * s * a * (d + 1.0).ln().min(s) * log_t * (b * s / delta).ln()).sqrt();
    let linear_term = 64.0 * d * s * a * log_t * (b / delta).ln();
    Ok(BoundReport {
        sqrt_term,
        linear_term,
    })
}

/// Upper bound on the number of episodes started by the doubling rule:
/// `S A log2(8T / (S A))`.
pub fn episode_bound(num_states: usize, num_actions: usize, horizon: u64) -> Result<f64, VerifyError> {
    let (s, a, t) = (num_states as f64, num_actions as f64, horizon as f64);
    if s < 1.0 || a < 1.0 {
        return Err(domain("num_states/num_actions", "must be positive"));
    }
    if t <= s * a {
        return Err(domain("horizon", "must exceed num_states * num_actions"));
    }
    Ok(s * a * (8.0 * t / (s * a)).log2())
}

/// Random statistics table for property tests and the verification suites:
/// every (s, a) gets a random visit budget, a random categorical next-state
/// law, and either a constant or a uniform reward source.
pub fn random_counts_table(
    rng: &mut Stream,
    num_states: usize,
    num_actions: usize,
    max_visits: u64,
) -> CountsTable {
    let mut table = CountsTable::new(num_states, num_actions);
    for s in 0..num_states {
        for a in 0..num_actions {
            let n = rng.gen_range(0..=max_visits);
            let weights: Vec<f64> = (0..num_states).map(|_| rng.gen::<f64>() + 1e-9).collect();
            let total: f64 = weights.iter().sum();
            let fixed_reward = rng.gen_bool(0.5);
            let r0: f64 = rng.gen();
            for _ in 0..n {
                let mut pick = rng.gen::<f64>() * total;
                let mut next = num_states - 1;
                for (j, &w) in weights.iter().enumerate() {
                    if pick < w {
                        next = j;
                        break;
                    }
                    pick -= w;
                }
                let r = if fixed_reward { r0 } else { rng.gen() };
                table.record_transition(s, a, r, next).unwrap();
            }
        }
    }
    table
}

/// Verification suites runnable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyScope {
    Subsets,
    Optimism,
    Submodularity,
    Bounds,
    All,
}

impl VerifyScope {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "subsets" => Some(VerifyScope::Subsets),
            "optimism" => Some(VerifyScope::Optimism),
            "submodularity" => Some(VerifyScope::Submodularity),
            "bounds" => Some(VerifyScope::Bounds),
            "all" => Some(VerifyScope::All),
            _ => None,
        }
    }

    /// Corruption is defined for the polytope checks, not the closed forms.
    pub fn supports_corruption(&self) -> bool {
        !matches!(self, VerifyScope::Bounds)
    }
}

#[derive(Debug, Default)]
pub struct SuiteReport {
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn merge(&mut self, other: SuiteReport) {
        self.cases += other.cases;
        self.failures.extend(other.failures);
    }
}

/// Runs the selected oracle suite. With `corrupt` the inputs are
/// deliberately broken and the failures list is expected to be non-empty
/// (negative control).
pub fn run_suite(scope: VerifyScope, corrupt: bool, seed: u64) -> SuiteReport {
    match scope {
        VerifyScope::Subsets => subsets_suite(corrupt, seed),
        VerifyScope::Optimism => optimism_suite(corrupt, seed),
        VerifyScope::Submodularity => submodularity_suite(corrupt, seed),
        VerifyScope::Bounds => bounds_suite(),
        VerifyScope::All => {
            let mut report = SuiteReport::default();
            report.merge(subsets_suite(corrupt, seed));
            report.merge(optimism_suite(corrupt, seed));
            report.merge(submodularity_suite(corrupt, seed));
            if !corrupt {
                report.merge(bounds_suite());
            }
            report
        }
    }
}

fn suite_levels(rng: &mut Stream, ns: usize, na: usize) -> ConfidenceLevels {
    crate::confidence::episode_confidence_levels(rng.gen_range(1..=100_000), 0.05, ns, na)
}

fn subsets_suite(corrupt: bool, seed: u64) -> SuiteReport {
    let mut rng = Stream::seed_from_u64(seed);
    let mut report = SuiteReport::default();
    for case in 0..300 {
        let ns = rng.gen_range(2..=6);
        let na = rng.gen_range(1..=2);
        // Skew a few tables toward heavy visitation so singleton bounds bind.
        let max_visits = if case % 3 == 0 { 2000 } else { 200 };
        let table = random_counts_table(&mut rng, ns, na, max_visits);
        let lv = suite_levels(&mut rng, ns, na);
        let u: Vec<f64> = (0..ns).map(|_| rng.gen()).collect();
        let s = rng.gen_range(0..ns);
        let a = rng.gen_range(0..na);
        let mut p = optimistic_transition(&u, &table, s, a, &lv);
        if corrupt {
            // Dump all mass on the most valuable state, ignoring its bound.
            let best = (0..ns)
                .max_by(|&i, &j| u[i].partial_cmp(&u[j]).unwrap())
                .unwrap();
            p.iter_mut().for_each(|x| *x = 0.0);
            p[best] = 1.0;
        }
        report.cases += 1;
        match check_all_subsets(&p, &table, s, a, &lv) {
            Ok(true) => {}
            Ok(false) => report.failures.push(format!(
                "case {case}: subset bound violated (S={ns}, pair=({s},{a}), n={}, p={p:?})",
                table.total_count(s, a)
            )),
            Err(e) => report.failures.push(format!("case {case}: {e}")),
        }
    }
    report
}

fn optimism_suite(corrupt: bool, seed: u64) -> SuiteReport {
    let mut rng = Stream::seed_from_u64(seed ^ 0x0dd);
    let mut report = SuiteReport::default();
    for case in 0..100 {
        let ns = 3;
        let table = random_counts_table(&mut rng, ns, 1, 500);
        let lv = suite_levels(&mut rng, ns, 1);
        let u: Vec<f64> = (0..ns).map(|_| rng.gen()).collect();
        let spread = crate::evi::span(&u);
        let p = if corrupt {
            // Greedy assignment in the worst order: clearly suboptimal.
            let mut order: Vec<usize> = (0..ns).collect();
            order.sort_by(|&i, &j| u[i].partial_cmp(&u[j]).unwrap());
            let mut out = vec![0.0; ns];
            let mut prefix = Vec::new();
            let mut assigned = 0.0;
            for &j in &order {
                prefix.push(j);
                let cap = table.subset_upper_bound(0, 0, &prefix, &lv);
                let give = (cap - assigned).min(1.0 - assigned).max(0.0);
                out[j] = give;
                assigned += give;
            }
            out
        } else {
            optimistic_transition(&u, &table, 0, 0, &lv)
        };
        let value: f64 = p.iter().zip(&u).map(|(p, u)| p * u).sum();
        let oracle = match inner_max_oracle(&u, &table, 0, 0, &lv, 1e-3) {
            Ok(v) => v,
            Err(e) => {
                report.cases += 1;
                report.failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        report.cases += 1;
        if value < oracle - 2e-3 * spread.max(1e-9) {
            report.failures.push(format!(
                "case {case}: transition value {value} below grid oracle {oracle} (u={u:?})"
            ));
        }
    }
    report
}

fn submodularity_suite(corrupt: bool, seed: u64) -> SuiteReport {
    let mut rng = Stream::seed_from_u64(seed ^ 0xbeef);
    let mut report = SuiteReport::default();
    for case in 0..300 {
        let ns = rng.gen_range(2..=6);
        let table = random_counts_table(&mut rng, ns, 1, 500);
        let lv = suite_levels(&mut rng, ns, 1);
        report.cases += 1;
        let ok = if corrupt {
            // Swap the concave radius for a convex one; diminishing margins
            // must break once masses differ.
            let n = table.total_count(0, 0).max(2);
            check_submodularity_with(ns, |mask| {
                let mut mass = 0u64;
                for sp in 0..ns {
                    if mask & (1 << sp) != 0 {
                        mass += table.next_count(0, 0, sp);
                    }
                }
                let p_bar = mass as f64 / n as f64;
                p_bar + 0.5 * p_bar * p_bar
            })
        } else {
            match check_submodularity(&table, 0, 0, &lv) {
                Ok(ok) => ok,
                Err(e) => {
                    report.failures.push(format!("case {case}: {e}"));
                    continue;
                }
            }
        };
        if !ok {
            report.failures.push(format!(
                "case {case}: diminishing-margin check failed (S={ns}, n={})",
                table.total_count(0, 0)
            ));
        }
    }
    report
}

fn bounds_suite() -> SuiteReport {
    let mut report = SuiteReport::default();
    let grid = [
        (15.0, 6, 2, 1u64 << 24),
        (475.0, 20, 2, 1 << 24),
        (4.0, 2, 2, 1 << 18),
    ];
    for (d, s, a, t) in grid {
        report.cases += 1;
        match theoretical_regret_bound(d, s, a, t, 0.05) {
            Ok(b) => {
                if !(b.sqrt_term.is_finite() && b.sqrt_term > 0.0)
                    || !(b.linear_term.is_finite() && b.linear_term > 0.0)
                {
                    report
                        .failures
                        .push(format!("bound not finite-positive at D={d}, S={s}, A={a}, T={t}"));
                }
            }
            Err(e) => report.failures.push(format!("bound errored: {e}")),
        }
        report.cases += 1;
        match episode_bound(s, a, t) {
            Ok(m) if m.is_finite() && m > 0.0 => {}
            Ok(m) => report.failures.push(format!("episode bound {m} not positive")),
            Err(e) => report.failures.push(format!("episode bound errored: {e}")),
        }
    }
    report
}
