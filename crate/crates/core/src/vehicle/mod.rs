//! Vehicle kinematics and the trajectory-level action interface.
//!
//! Policies never command wheels directly. They emit steering/acceleration
//! tuples which [`get_traj`] rolls out into an egocentric trajectory; a
//! [`tracking::Tracker`] then turns that trajectory into wheel commands for the
//! [`dynamics`] model.

pub mod dynamics;
mod rollout;
pub mod tracking;

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dynamics::{step_dynamics, VehicleParams, WheelCommand};
pub use rollout::{get_traj, RolloutConfig};
pub use tracking::{pid_track, Tracker, TrackingGains};

/// Number of points in the past-trajectory observation.
pub const PAST_LEN: usize = 10;

/// Steering bound for action tuples, radians.
pub const MAX_ACTION_STEER: f64 = FRAC_PI_4;

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2 { x, y, yaw }
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Express a world point in this pose's frame.
    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Inverse of [`Pose2::to_local`].
    pub fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Normalised to (-pi, pi].
    pub yaw: f64,
    /// Non-negative forward speed, m/s.
    pub speed: f64,
}

impl VehicleState {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }
}

/// One policy action: steering `steer` in [-pi/4, pi/4] (positive turns
/// left) and dimensionless acceleration `accel` in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionTuple {
    pub steer: f64,
    pub accel: f64,
}

impl ActionTuple {
    /// Clamps into the action bounds. NaN maps to zero.
    pub fn new(steer: f64, accel: f64) -> Self {
        let nz = |v: f64| if v.is_nan() { 0.0 } else { v };
        ActionTuple {
            steer: nz(steer).clamp(-MAX_ACTION_STEER, MAX_ACTION_STEER),
            accel: nz(accel).clamp(0.0, 1.0),
        }
    }

    pub fn in_bounds(&self) -> bool {
        (-MAX_ACTION_STEER..=MAX_ACTION_STEER).contains(&self.steer)
            && (0.0..=1.0).contains(&self.accel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Ego,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajPoint {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl TrajPoint {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        TrajPoint { x, y, yaw }
    }
    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Ordered `(x, y, yaw)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub frame: Frame,
    pub points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn ego(points: Vec<TrajPoint>) -> Self {
        Trajectory {
            frame: Frame::Ego,
            points,
        }
    }

    pub fn world(points: Vec<TrajPoint>) -> Self {
        Trajectory {
            frame: Frame::World,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TrajPoint> {
        self.points.last()
    }

    pub fn is_finite(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.x.is_finite() && p.y.is_finite() && p.yaw.is_finite())
    }

    /// Distance between the last two points (the current per-step spacing).
    pub fn last_spacing(&self) -> Result<f64> {
        let n = self.points.len();
        if n < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 points, got {n}"
            )));
        }
        let a = self.points[n - 2];
        let b = self.points[n - 1];
        Ok(((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt())
    }

    /// Total polyline length.
    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
            .sum()
    }

    /// Map an egocentric trajectory into the world using the pose it was
    /// proposed from.
    pub fn to_world(&self, reference: &Pose2) -> Trajectory {
        debug_assert_eq!(self.frame, Frame::Ego);
        Trajectory::world(
            self.points
                .iter()
                .map(|p| {
                    let w = reference.to_world(p.xy());
                    TrajPoint::new(w[0], w[1], wrap_angle(p.yaw + reference.yaw))
                })
                .collect(),
        )
    }

    pub fn flat_xyyaw(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [p.x, p.y, p.yaw]).collect()
    }
}

/// Rigid transform of world-frame points into the frame of `reference`:
/// translate by `-position`, rotate by `-yaw`.
pub fn egocentric_transform(world_points: &[TrajPoint], reference: &Pose2) -> Trajectory {
    Trajectory::ego(
        world_points
            .iter()
            .map(|p| {
                let l = reference.to_local(p.xy());
                TrajPoint::new(l[0], l[1], wrap_angle(p.yaw - reference.yaw))
            })
            .collect(),
    )
}
