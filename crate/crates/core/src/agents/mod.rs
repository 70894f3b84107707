//! The learning algorithms behind one uniform interface.
//!
//! Agents are single-threaded state machines: the harness calls [`Agent::act`],
//! steps the environment, then feeds the observation back through
//! [`Agent::observe`], which reports whether the observation closed an episode
//! (i.e. the agent replanned). Identifier masking happens outside: agents only
//! ever see the harness's (possibly permuted) state and action indices.

mod tsde;
mod ucrl2;
mod ucrlv;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tsde::TsdeAgent;
pub use ucrl2::Ucrl2Agent;
pub use ucrlv::UcrlVAgent;

use crate::confidence::DataError;
use crate::mdp::SolveError;
use crate::streams::Stream;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("planning failed in episode {episode} at round {round}: {source}")]
    Planning {
        episode: u64,
        round: u64,
        source: SolveError,
    },
}

pub trait Agent: Send {
    fn name(&self) -> &'static str;

    /// Action of the current policy in `state`.
    fn act(&self, state: usize) -> usize;

    /// Records one transition. Returns `true` when the observation ended the
    /// current episode (the agent has already replanned for the next one).
    fn observe(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
    ) -> Result<bool, AgentError>;

    /// Number of episodes started so far (at least 1 once constructed).
    fn episodes_started(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    Ucrlv,
    Ucrl2,
    Tsde,
}

impl AlgoKind {
    pub fn label(&self) -> &'static str {
        match self {
            AlgoKind::Ucrlv => "ucrlv",
            AlgoKind::Ucrl2 => "ucrl2",
            AlgoKind::Tsde => "tsde",
        }
    }
}

/// Tunables that are deliberately config-overridable; defaults are the
/// canonical constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoParams {
    /// Constant inside UCRL2's reward radius `sqrt(C ln(2SAt/δ) / (2 max(1,N)))`.
    pub ucrl2_reward_scale: f64,
    /// Constant inside UCRL2's transition budget `sqrt(C S ln(2At/δ) / max(1,N))`.
    pub ucrl2_transition_scale: f64,
    /// TSDE stopping rule: episode length exceeds the previous episode's.
    pub tsde_length_rule: bool,
    /// TSDE stopping rule: some visit count doubles within the episode.
    pub tsde_doubling_rule: bool,
}

impl Default for AlgoParams {
    fn default() -> Self {
        AlgoParams {
            ucrl2_reward_scale: 7.0,
            ucrl2_transition_scale: 14.0,
            tsde_length_rule: true,
            tsde_doubling_rule: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoSpec {
    pub kind: AlgoKind,
    #[serde(default)]
    pub params: AlgoParams,
}

impl AlgoSpec {
    pub fn new(kind: AlgoKind) -> Self {
        AlgoSpec {
            kind,
            params: AlgoParams::default(),
        }
    }
}

/// Instantiates an agent, planning its first episode immediately. The stream
/// is the trial's private agent randomness; only the posterior-sampling agent
/// consumes it.
pub fn build_agent(
    spec: &AlgoSpec,
    num_states: usize,
    num_actions: usize,
    delta: f64,
    agent_stream: Stream,
) -> Result<Box<dyn Agent>, AgentError> {
    Ok(match spec.kind {
        AlgoKind::Ucrlv => Box::new(UcrlVAgent::new(num_states, num_actions, delta)?),
        AlgoKind::Ucrl2 => Box::new(Ucrl2Agent::new(
            num_states,
            num_actions,
            delta,
            &spec.params,
        )?),
        AlgoKind::Tsde => Box::new(TsdeAgent::new(
            num_states,
            num_actions,
            &spec.params,
            agent_stream,
        )?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn build_agent_dispatches_by_kind() {
        for (kind, name) in [
            (AlgoKind::Ucrlv, "ucrlv"),
            (AlgoKind::Ucrl2, "ucrl2"),
            (AlgoKind::Tsde, "tsde"),
        ] {
            let spec = AlgoSpec::new(kind);
            let agent = build_agent(&spec, 3, 2, 0.05, Stream::seed_from_u64(7)).unwrap();
            assert_eq!(agent.name(), name);
            assert_eq!(agent.name(), kind.label());
            assert_eq!(agent.episodes_started(), 1);
        }
    }

    #[test]
    fn single_action_agents_always_play_it() {
        for kind in [AlgoKind::Ucrlv, AlgoKind::Ucrl2, AlgoKind::Tsde] {
            let spec = AlgoSpec::new(kind);
            let mut agent = build_agent(&spec, 4, 1, 0.05, Stream::seed_from_u64(0)).unwrap();
            for s in 0..4 {
                assert_eq!(agent.act(s), 0);
            }
            agent.observe(0, 0, 0.5, 1).unwrap();
            assert_eq!(agent.act(1), 0);
        }
    }

    #[test]
    fn params_default_to_canonical_constants() {
        let p = AlgoParams::default();
        assert_eq!(p.ucrl2_reward_scale, 7.0);
        assert_eq!(p.ucrl2_transition_scale, 14.0);
        assert!(p.tsde_length_rule && p.tsde_doubling_rule);
    }

    #[test]
    fn rejects_out_of_range_reward() {
        let spec = AlgoSpec::new(AlgoKind::Ucrlv);
        let mut agent = build_agent(&spec, 2, 2, 0.05, Stream::seed_from_u64(0)).unwrap();
        assert!(agent.observe(0, 0, 1.5, 1).is_err());
    }
}
