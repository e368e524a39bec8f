//! Kinematic bicycle model.

use serde::{Deserialize, Serialize};

use super::{wrap_angle, VehicleState};
use crate::world::{World, DEFAULT_FOOTPRINT_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    /// m/s² at full throttle (and full brake).
    pub max_accel: f64,
    pub max_speed: f64,
    /// Front wheel angle limit, radians.
    pub max_wheel_steer: f64,
    pub footprint_radius: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase: 2.9,
            max_accel: 3.0,
            max_speed: 10.0,
            max_wheel_steer: 0.6,
            footprint_radius: DEFAULT_FOOTPRINT_RADIUS,
        }
    }
}

/// Front wheel angle (positive turns left) and throttle in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelCommand {
    pub steer: f64,
    pub throttle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsStep {
    pub state: VehicleState,
    pub collision: bool,
}

/// Advance one kinematic bicycle step of `dt` seconds.
///
/// Speed integrates throttle and is clamped to `[0, max_speed]`; yaw rate is
/// `speed / wheelbase * tan(steer)`; the position advances along the updated
/// yaw. `collision` reports whether the new footprint overlaps an obstacle.
pub fn step_dynamics(
    state: &VehicleState,
    cmd: WheelCommand,
    dt: f64,
    world: &World,
    params: &VehicleParams,
) -> DynamicsStep {
    let throttle = cmd.throttle.clamp(-1.0, 1.0);
    let steer = cmd
        .steer
        .clamp(-params.max_wheel_steer, params.max_wheel_steer);
    let speed = (state.speed + throttle * params.max_accel * dt).clamp(0.0, params.max_speed);
    let yaw = wrap_angle(state.yaw + speed / params.wheelbase * steer.tan() * dt);
    let x = state.x + speed * yaw.cos() * dt;
    let y = state.y + speed * yaw.sin() * dt;
    let next = VehicleState { x, y, yaw, speed };
    DynamicsStep {
        state: next,
        collision: world.query_collision(x, y, params.footprint_radius),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Preset, WorldSpec};
    use proptest::prelude::*;

    fn flat() -> World {
        World::flat_with_obstacles(WorldSpec::empty_flat(Preset::Meadow, 0), vec![]).unwrap()
    }

    #[test]
    fn straight_line() {
        let w = flat();
        let s = VehicleState { x: 10.0, y: 10.0, yaw: 0.0, speed: 2.0 };
        let out = step_dynamics(&s, WheelCommand::default(), 0.1, &w, &VehicleParams::default());
        assert!((out.state.x - 10.2).abs() < 1e-12);
        assert_eq!(out.state.y, 10.0);
        assert!(!out.collision);
    }

    #[test]
    fn brake_at_rest_stays_at_rest() {
        let w = flat();
        let s = VehicleState { x: 10.0, y: 10.0, yaw: 0.0, speed: 0.0 };
        let out = step_dynamics(&s, WheelCommand { steer: 0.0, throttle: -1.0 }, 0.1, &w, &VehicleParams::default());
        assert_eq!(out.state.speed, 0.0);
        assert_eq!((out.state.x, out.state.y), (10.0, 10.0));
    }

    #[test]
    fn constant_steer_follows_analytic_circle() {
        let w = flat();
        let p = VehicleParams::default();
        let (v, delta, dt) = (3.0, 0.1f64, 0.01);
        let rate = v / p.wheelbase * delta.tan();
        let radius = p.wheelbase / delta.tan();
        let mut s = VehicleState { x: 50.0, y: 50.0, yaw: 0.0, speed: v };
        let center = [50.0, 50.0 + radius];
        for _ in 0..100 {
            s = step_dynamics(&s, WheelCommand { steer: delta, throttle: 0.0 }, dt, &w, &p).state;
        }
        assert!((s.yaw - rate * 100.0 * dt).abs() < 1e-9);
        let r = ((s.x - center[0]).powi(2) + (s.y - center[1]).powi(2)).sqrt();
        // Semi-implicit Euler on a circle drifts O(v*dt) in radius.
        assert!((r - radius).abs() < v * dt, "r={r} expected {radius}");
    }

    proptest! {
        #[test]
        fn non_positive_throttle_never_speeds_up(speed in 0.0..10.0f64, thr in -1.0..=0.0f64, steer in -0.6..0.6f64) {
            let w = flat();
            let s = VehicleState { x: 50.0, y: 50.0, yaw: 0.3, speed };
            let out = step_dynamics(&s, WheelCommand { steer, throttle: thr }, 0.05, &w, &VehicleParams::default());
            prop_assert!(out.state.speed <= speed);
            prop_assert!(out.state.speed >= 0.0);
        }
    }
}
