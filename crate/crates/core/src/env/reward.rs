//! Per-substep reward: sparse goal term, attitude penalty, steering penalty,
//! collision penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Goal term when reached / otherwise.
pub const GOAL_REWARD: f64 = 100.0;
pub const STEP_PENALTY: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub goal: f64,
    pub upright: f64,
    pub steer: f64,
    pub collision: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            goal: 1.0,
            upright: 1.0,
            steer: 0.1,
            collision: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn unit() -> Self {
        RewardWeights {
            goal: 1.0,
            upright: 1.0,
            steer: 1.0,
            collision: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.goal, self.upright, self.steer, self.collision];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig(format!("reward weights must be >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// Unweighted reward terms. Values sum over substeps when accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub goal: f64,
    pub upright: f64,
    pub steer: f64,
    pub collision: f64,
}

impl RewardComponents {
    pub fn total(&self, w: &RewardWeights) -> f64 {
        w.goal * self.goal + w.upright * self.upright + w.steer * self.steer + w.collision * self.collision
    }

    /// Weighted sum of everything except the goal term.
    pub fn non_goal_total(&self, w: &RewardWeights) -> f64 {
        w.upright * self.upright + w.steer * self.steer + w.collision * self.collision
    }

    pub fn add(&mut self, o: &RewardComponents) {
        self.goal += o.goal;
        self.upright += o.upright;
        self.steer += o.steer;
        self.collision += o.collision;
    }
}

/// The single goal test shared by the reward and episode termination.
pub fn goal_reached(goal: [f64; 2], achieved: [f64; 2], radius: f64) -> bool {
    let dx = goal[0] - achieved[0];
    let dy = goal[1] - achieved[1];
    (dx * dx + dy * dy).sqrt() < radius
}

pub fn goal_term(goal: [f64; 2], achieved: [f64; 2], radius: f64) -> f64 {
    if goal_reached(goal, achieved, radius) {
        GOAL_REWARD
    } else {
        STEP_PENALTY
    }
}

/// `-max(|roll|, |pitch|) / 180`, angles in degrees.
pub fn upright_term(roll: f64, pitch: f64) -> f64 {
    -roll.abs().max(pitch.abs()) / 180.0
}

/// `-||steer||_2` over the given steering angles.
pub fn steer_term(steers: &[f64]) -> f64 {
    -steers.iter().map(|s| s * s).sum::<f64>().sqrt()
}

pub fn collision_term(collision: bool) -> f64 {
    if collision {
        -1.0
    } else {
        0.0
    }
}

pub fn reward_components(
    goal: [f64; 2],
    achieved: [f64; 2],
    steers: &[f64],
    collision: bool,
    roll: f64,
    pitch: f64,
    goal_radius: f64,
) -> RewardComponents {
    RewardComponents {
        goal: goal_term(goal, achieved, goal_radius),
        upright: upright_term(roll, pitch),
        steer: steer_term(steers),
        collision: collision_term(collision),
    }
}

/// Weighted reward for one evaluation.
#[allow(clippy::too_many_arguments)]
pub fn reward(
    goal: [f64; 2],
    achieved: [f64; 2],
    steers: &[f64],
    collision: bool,
    roll: f64,
    pitch: f64,
    goal_radius: f64,
    w: &RewardWeights,
) -> f64 {
    reward_components(goal, achieved, steers, collision, roll, pitch, goal_radius).total(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let w = RewardWeights::unit();
        assert_eq!(reward([5.0, 0.0], [5.5, 0.0], &[0.0], false, 0.0, 0.0, 2.0, &w), 100.0);
        let r = reward([20.0, 0.0], [0.0, 0.0], &[0.0], false, 0.0, 18.0, 2.0, &w);
        assert!((r + 1.1).abs() < 1e-12);
        let r = reward([20.0, 0.0], [0.0, 0.0], &[0.5], true, 0.0, 0.0, 2.0, &w);
        assert!((r + 2.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(goal_term([2.0, 0.0], [0.0, 0.0], 2.0), -1.0);
        assert_eq!(goal_term([1.999, 0.0], [0.0, 0.0], 2.0), 100.0);
    }

    #[test]
    fn weights_validate() {
        assert!(RewardWeights { steer: -0.1, ..Default::default() }.validate().is_err());
        assert!(RewardWeights::default().validate().is_ok());
    }
}
