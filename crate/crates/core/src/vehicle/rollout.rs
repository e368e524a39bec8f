use serde::{Deserialize, Serialize};

use super::{ActionTuple, TrajPoint, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    /// Heading increment per step, radians.
    pub heading_step: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig { heading_step: 0.1 }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.heading_step > 0.0 && self.heading_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "heading_step must be > 0, got {}",
                self.heading_step
            )));
        }
        Ok(())
    }
}

/// Sign with `sign(0) = 0`.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Roll out `l` egocentric points from action tuples.
///
/// The step length starts at the spacing of the last two past points and
/// grows by each tuple's `accel`; the heading moves toward the tuple's
/// steering sign by `heading_step` and is clipped into `[-|steer|, |steer|]`.
/// Point `i + 1` is point `i` plus the step vector rotated by the heading,
/// and carries that heading as its yaw. The first point is the origin.
pub fn get_traj(
    l: usize,
    past: &Trajectory,
    actions: &[ActionTuple],
    cfg: &RolloutConfig,
) -> Result<Trajectory> {
    if l == 0 {
        return Err(Error::EmptyRollout);
    }
    let mut step = past.last_spacing()?;
    if actions.len() + 1 < l {
        return Err(Error::InvalidTrajectory(format!(
            "rollout of {l} points needs {} actions, got {}",
            l - 1,
            actions.len()
        )));
    }
    let mut heading = 0.0f64;
    let mut points = Vec::with_capacity(l);
    points.push(TrajPoint::default());
    for a in &actions[..l - 1] {
        step += a.accel;
        let bound = a.steer.abs();
        heading = (heading + cfg.heading_step * sign(a.steer)).clamp(-bound, bound);
        let prev = points[points.len() - 1];
        let (s, c) = heading.sin_cos();
        points.push(TrajPoint::new(prev.x + c * step, prev.y + s * step, heading));
    }
    Ok(Trajectory::ego(points))
}
