//! Trajectory tracking: pure-pursuit steering plus a PID correction on
//! cross-track error, and a proportional speed loop on the speed implied by
//! trajectory point spacing.

use serde::{Deserialize, Serialize};

use super::{wrap_angle, Frame, Trajectory, VehicleParams, VehicleState, WheelCommand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingGains {
    /// Weight on the pure-pursuit steering angle.
    pub pursuit: f64,
    pub cross_track_p: f64,
    pub cross_track_i: f64,
    pub cross_track_d: f64,
    pub speed_p: f64,
    pub lookahead_min: f64,
    /// Lookahead grows with speed: `max(lookahead_min, speed * lookahead_time)`.
    pub lookahead_time: f64,
    /// Time between consecutive trajectory points, seconds.
    pub point_period: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        TrackingGains {
            pursuit: 1.0,
            cross_track_p: 0.15,
            cross_track_i: 0.0,
            cross_track_d: 0.05,
            speed_p: 1.0,
            lookahead_min: 2.0,
            lookahead_time: 0.4,
            point_period: 0.1,
        }
    }
}

/// Closest-point query result on a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProjection {
    /// Arc length of the closest point.
    pub arc: f64,
    /// Signed lateral offset of the query point; positive means left of path.
    pub cross_track: f64,
    /// Index of the segment containing the closest point.
    pub segment: usize,
}

/// Project `p` onto the polyline; past the final point the last segment is
/// extended as a ray.
pub fn project(points: &[[f64; 2]], p: [f64; 2]) -> PathProjection {
    if points.len() < 2 {
        let o = points.first().copied().unwrap_or([0.0, 0.0]);
        return PathProjection {
            arc: 0.0,
            cross_track: ((p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2)).sqrt(),
            segment: 0,
        };
    }
    let last = points.len() - 2;
    let mut best = (f64::INFINITY, PathProjection { arc: 0.0, cross_track: 0.0, segment: 0 });
    let mut arc0 = 0.0;
    for (k, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len == 0.0 {
            continue;
        }
        let u = [d[0] / len, d[1] / len];
        let ap = [p[0] - a[0], p[1] - a[1]];
        let along = ap[0] * u[0] + ap[1] * u[1];
        let t = if k == last { along.max(0.0) } else { along.clamp(0.0, len) };
        let foot = [a[0] + t * u[0], a[1] + t * u[1]];
        let dist2 = (p[0] - foot[0]).powi(2) + (p[1] - foot[1]).powi(2);
        if dist2 < best.0 {
            let cross = u[0] * ap[1] - u[1] * ap[0];
            best = (dist2, PathProjection { arc: arc0 + t, cross_track: cross, segment: k });
        }
        arc0 += len;
    }
    best.1
}

/// Point and tangent heading at arc length `s`, extrapolating linearly past
/// the end.
fn point_at(points: &[[f64; 2]], s: f64) -> ([f64; 2], f64) {
    let mut acc = 0.0;
    let mut last = (points[0], 0.0);
    for w in points.windows(2) {
        let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len == 0.0 {
            continue;
        }
        let heading = d[1].atan2(d[0]);
        if s <= acc + len {
            let t = (s - acc).max(0.0);
            return ([w[0][0] + t * d[0] / len, w[0][1] + t * d[1] / len], heading);
        }
        acc += len;
        last = (w[1], heading);
    }
    let (end, heading) = last;
    let extra = s - acc;
    ([end[0] + extra * heading.cos(), end[1] + extra * heading.sin()], heading)
}

/// Stateful tracker; the integral and derivative terms persist across calls.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    pub gains: TrackingGains,
    pub params: VehicleParams,
    integral: f64,
    prev_cross: Option<f64>,
}

impl Tracker {
    pub fn new(gains: TrackingGains, params: VehicleParams) -> Self {
        Tracker { gains, params, integral: 0.0, prev_cross: None }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_cross = None;
    }

    /// Wheel command to follow `traj` (world frame), `dt` seconds per call.
    pub fn track(&mut self, state: &VehicleState, traj: &Trajectory, dt: f64) -> WheelCommand {
        debug_assert_eq!(traj.frame, Frame::World);
        let g = self.gains;
        let pts: Vec<[f64; 2]> = traj.points.iter().map(|p| p.xy()).collect();
        if pts.len() < 2 || traj.arc_length() == 0.0 {
            // Nothing to follow: hold heading and stop.
            return WheelCommand { steer: 0.0, throttle: (-g.speed_p * state.speed).clamp(-1.0, 1.0) };
        }
        let pos = [state.x, state.y];
        let proj = project(&pts, pos);

        let lookahead = g.lookahead_min.max(state.speed * g.lookahead_time);
        let (target, _) = point_at(&pts, proj.arc + lookahead);
        let alpha = wrap_angle((target[1] - pos[1]).atan2(target[0] - pos[0]) - state.yaw);
        let dist = ((target[0] - pos[0]).powi(2) + (target[1] - pos[1]).powi(2)).sqrt().max(1e-9);
        let pursuit = (2.0 * self.params.wheelbase * alpha.sin() / dist).atan();

        let e = proj.cross_track;
        self.integral += e * dt;
        let de = match self.prev_cross {
            Some(prev) if dt > 0.0 => (e - prev) / dt,
            _ => 0.0,
        };
        self.prev_cross = Some(e);
        let steer = g.pursuit * pursuit
            - g.cross_track_p * e
            - g.cross_track_i * self.integral
            - g.cross_track_d * de;

        let seg = proj.segment.min(pts.len() - 2);
        let spacing = ((pts[seg + 1][0] - pts[seg][0]).powi(2) + (pts[seg + 1][1] - pts[seg][1]).powi(2)).sqrt();
        let target_speed = (spacing / g.point_period).min(self.params.max_speed);
        let throttle = g.speed_p * (target_speed - state.speed);

        WheelCommand {
            steer: steer.clamp(-self.params.max_wheel_steer, self.params.max_wheel_steer),
            throttle: throttle.clamp(-1.0, 1.0),
        }
    }
}

/// Single tracking evaluation with no integral/derivative history.
pub fn pid_track(
    state: &VehicleState,
    traj: &Trajectory,
    gains: &TrackingGains,
    params: &VehicleParams,
) -> WheelCommand {
    Tracker::new(*gains, *params).track(state, traj, gains.point_period)
}
