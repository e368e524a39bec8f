use serde::{Deserialize, Serialize};

use super::{ActionSequence, RewardComponents, StepOutcome};
use crate::vehicle::{ActionTuple, VehicleState};

/// One line of an episode JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogRecord {
    pub episode: u64,
    /// Decision index within the episode.
    pub t: usize,
    /// State after the decision.
    pub state: VehicleState,
    pub actions: Vec<ActionTuple>,
    pub reward: f64,
    pub components: RewardComponents,
    pub done: bool,
    pub achieved: [f64; 2],
    pub goal: [f64; 2],
    pub collisions: usize,
    pub reached_goal: bool,
}

impl EpisodeLogRecord {
    pub fn new(episode: u64, state: VehicleState, actions: &ActionSequence, out: &StepOutcome) -> Self {
        EpisodeLogRecord {
            episode,
            t: out.info.decision,
            state,
            actions: actions.0.clone(),
            reward: out.reward,
            components: out.info.components,
            done: out.done,
            achieved: out.info.achieved_world,
            goal: out.info.goal_world,
            collisions: out.info.collisions,
            reached_goal: out.info.reached_goal,
        }
    }
}
