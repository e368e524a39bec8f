//! Goal-conditioned episodic driving environment.
//!
//! One decision takes an [`ActionSequence`] of `A` tuples, rolls it out with
//! [`get_traj`] into an egocentric trajectory, and tracks that trajectory for
//! `A * substeps` physics steps. Reward is evaluated after every physics step
//! and summed over the decision. The observation is the ground-truth class
//! map from the vehicle camera plus the egocentric past trajectory and goal.

mod log;
pub mod reward;
pub mod sync;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{self, CameraModel, ClassMap};
use crate::rng;
use crate::vehicle::{
    egocentric_transform, get_traj, step_dynamics, ActionTuple, Pose2, RolloutConfig, TrajPoint, Tracker,
    TrackingGains, Trajectory, VehicleParams, VehicleState, PAST_LEN,
};
use crate::world::{generate_world, World, WorldSpec};

pub use log::EpisodeLogRecord;
pub use reward::{goal_reached, RewardComponents, RewardWeights, GOAL_REWARD};
pub use sync::{MessageKind, MessageSynchronizer, SyncBundle, TimedMessage, SYNC_WINDOW};

/// Episode length in seconds used by [`EpisodeConfig::for_horizon`].
pub const EPISODE_SECONDS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// Goals are sampled within this distance of the start, meters.
    pub goal_range: f64,
    /// Goal test threshold, meters.
    pub goal_radius: f64,
    pub max_decisions: usize,
    /// Physics steps per action tuple.
    pub substeps: usize,
    /// Physics step, seconds.
    pub dt: f64,
    /// Speed at reset, m/s.
    pub initial_speed: f64,
    pub collision_terminal: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            goal_range: 20.0,
            goal_radius: 2.0,
            max_decisions: 40,
            substeps: 2,
            dt: 0.05,
            initial_speed: 2.0,
            collision_terminal: false,
        }
    }
}

impl EpisodeConfig {
    /// Seconds between odometry points (one action tuple).
    pub fn point_period(&self) -> f64 {
        self.dt * self.substeps as f64
    }

    /// Decision budget covering [`EPISODE_SECONDS`] for horizon `a`.
    pub fn for_horizon(mut self, a: usize) -> Self {
        let per_decision = self.point_period() * a.max(1) as f64;
        self.max_decisions = (EPISODE_SECONDS / per_decision).ceil() as usize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.goal_radius > 0.0) {
            return bad(format!("goal_radius must be > 0, got {}", self.goal_radius));
        }
        if !(self.goal_range > self.goal_radius) {
            return bad(format!("goal_range must exceed goal_radius, got {}", self.goal_range));
        }
        if self.max_decisions == 0 || self.substeps == 0 {
            return bad("max_decisions and substeps must be >= 1".into());
        }
        if !(self.dt > 0.0) || !(self.initial_speed >= 0.0) {
            return bad("dt must be > 0 and initial_speed >= 0".into());
        }
        Ok(())
    }
}

/// How the start pose and goal are chosen at reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Start at the world centre (or a random clear point in the central
    /// half), uniform yaw, goal uniform on the goal-range disc.
    Random,
    /// Constructed scene: given start and goal (world frame) with optional
    /// uniform jitter on yaw (radians) and goal position (meters).
    Fixed {
        start: [f64; 2],
        yaw: f64,
        goal: [f64; 2],
        yaw_jitter: f64,
        goal_jitter: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub world: Arc<World>,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Action tuples per decision (A).
    pub horizon: usize,
    pub episode: EpisodeConfig,
    pub weights: RewardWeights,
    pub camera: CameraModel,
    pub vehicle: VehicleParams,
    pub gains: TrackingGains,
    pub rollout: RolloutConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            horizon: 5,
            episode: EpisodeConfig::default(),
            weights: RewardWeights::default(),
            camera: CameraModel::with_resolution(32),
            vehicle: VehicleParams::default(),
            gains: TrackingGains::default(),
            rollout: RolloutConfig::default(),
        }
    }
}

impl EnvConfig {
    /// Default config for horizon `a` with the decision budget scaled to match.
    pub fn with_horizon(a: usize) -> Self {
        let d = EnvConfig::default();
        EnvConfig {
            horizon: a,
            episode: d.episode.for_horizon(a),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        self.episode.validate()?;
        self.weights.validate()?;
        self.camera.validate()?;
        self.rollout.validate()?;
        let mut gains = self.gains;
        gains.point_period = self.episode.point_period();
        if gains != self.gains {
            return Err(Error::InvalidConfig(format!(
                "tracker point_period {} must equal dt*substeps {}",
                self.gains.point_period,
                self.episode.point_period()
            )));
        }
        Ok(())
    }
}

/// Exactly `A` action tuples.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionSequence(pub Vec<ActionTuple>);

impl ActionSequence {
    /// Builds from `(steer, accel)` pairs, clamping into bounds.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        ActionSequence(pairs.iter().map(|&(s, a)| ActionTuple::new(s, a)).collect())
    }

    pub fn repeat(tuple: ActionTuple, a: usize) -> Self {
        ActionSequence(vec![tuple; a])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tuples(&self) -> &[ActionTuple] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub class_map: ClassMap,
    /// Last 10 odometry points in the current egocentric frame.
    pub past: Trajectory,
    /// Always the origin; kept for parity with offline records.
    pub s_a: [f64; 2],
    /// Egocentric goal, magnitude at most `goal_range`.
    pub s_g: [f64; 2],
}

impl Observation {
    pub fn one_hot(&self) -> Vec<f32> {
        self.class_map.one_hot()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Vehicle pose when the decision was made.
    pub reference_pose: Pose2,
    pub goal_world: [f64; 2],
    /// Position at the end of the decision, world frame.
    pub achieved_world: [f64; 2],
    /// Same, in the reference pose's egocentric frame.
    pub achieved: [f64; 2],
    /// Vehicle position after every physics step of the decision.
    pub path: Vec<[f64; 2]>,
    /// Unweighted reward terms summed over the decision.
    pub components: RewardComponents,
    /// Physics steps that ended in (and were blocked by) an obstacle.
    pub collisions: usize,
    /// Physics steps blocked at the world boundary.
    pub boundary_hits: usize,
    pub reached_goal: bool,
    /// Decision budget exhausted.
    pub truncated: bool,
    pub decision: usize,
    /// The tracked trajectory, world frame.
    pub planned: Trajectory,
}

impl StepInfo {
    pub fn collision(&self) -> bool {
        self.collisions > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Shared, read-only scenario pool plus config; cheap to clone and to spawn
/// independent [`Env`] instances from.
#[derive(Debug, Clone)]
pub struct EnvTemplate {
    scenarios: Arc<Vec<Scenario>>,
    config: Arc<EnvConfig>,
}

impl EnvTemplate {
    /// Generate one world per spec, each with random placement.
    pub fn new(config: EnvConfig, specs: &[WorldSpec]) -> Result<Self> {
        let scenarios = specs
            .iter()
            .map(|s| {
                Ok(Scenario {
                    world: Arc::new(generate_world(s)?),
                    placement: Placement::Random,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        EnvTemplate::from_scenarios(config, scenarios)
    }

    pub fn from_scenarios(config: EnvConfig, scenarios: Vec<Scenario>) -> Result<Self> {
        config.validate()?;
        if scenarios.is_empty() {
            return Err(Error::InvalidConfig("at least one world is required".into()));
        }
        Ok(EnvTemplate {
            scenarios: Arc::new(scenarios),
            config: Arc::new(config),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    /// Same scenarios, different config.
    pub fn with_config(&self, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(EnvTemplate {
            scenarios: self.scenarios.clone(),
            config: Arc::new(config),
        })
    }

    pub fn instance(&self) -> Env {
        Env {
            scenarios: self.scenarios.clone(),
            config: self.config.clone(),
            episode: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Episode {
    world: Arc<World>,
    state: VehicleState,
    goal: [f64; 2],
    odometry: VecDeque<TrajPoint>,
    tracker: Tracker,
    ticks: usize,
    decisions: usize,
    done: bool,
}

/// One environment instance. Owns its mutable state; not shared.
#[derive(Debug, Clone)]
pub struct Env {
    scenarios: Arc<Vec<Scenario>>,
    config: Arc<EnvConfig>,
    episode: Option<Episode>,
}

const PLACEMENT_TRIES: usize = 100;

fn sample_start(world: &World, r: f64, rng: &mut impl Rng) -> Result<[f64; 2]> {
    let e = world.extent();
    for k in 0..PLACEMENT_TRIES {
        let p = if k == 0 {
            world.start_position()
        } else {
            [rng.random_range(e / 4.0..=3.0 * e / 4.0), rng.random_range(e / 4.0..=3.0 * e / 4.0)]
        };
        if !world.query_collision(p[0], p[1], r) {
            return Ok(p);
        }
    }
    Err(Error::Placement(PLACEMENT_TRIES))
}

/// Uniform on the disc, rejecting goals already reached at the start.
fn sample_goal(
    world: &World,
    start: [f64; 2],
    range: f64,
    goal_radius: f64,
    r: f64,
    rng: &mut impl Rng,
) -> Result<[f64; 2]> {
    for _ in 0..PLACEMENT_TRIES {
        let rho = range * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let g = [start[0] + rho * phi.cos(), start[1] + rho * phi.sin()];
        if !reward::goal_reached(g, start, goal_radius) && world.in_bounds(g[0], g[1]) && !world.query_collision(g[0], g[1], r) {
            return Ok(g);
        }
    }
    Err(Error::Placement(PLACEMENT_TRIES))
}

impl Env {
    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    fn active(&self) -> Result<&Episode> {
        self.episode.as_ref().ok_or(Error::NotReset)
    }

    pub fn world(&self) -> Result<&Arc<World>> {
        Ok(&self.active()?.world)
    }

    pub fn state(&self) -> Result<VehicleState> {
        Ok(self.active()?.state)
    }

    pub fn goal_world(&self) -> Result<[f64; 2]> {
        Ok(self.active()?.goal)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_none_or(|e| e.done)
    }

    pub fn decisions(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.decisions)
    }

    /// Physics steps taken this episode.
    pub fn ticks(&self) -> Result<usize> {
        Ok(self.active()?.ticks)
    }

    /// Odometry history (world frame), oldest first.
    pub fn odometry(&self) -> Result<Vec<TrajPoint>> {
        Ok(self.active()?.odometry.iter().copied().collect())
    }

    /// Start a new episode. Deterministic in `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let cfg = self.config.clone();
        let mut rng = rng::stream(seed, 11);
        let scenario = &self.scenarios[rng.random_range(0..self.scenarios.len())];
        let world = scenario.world.clone();
        let r = cfg.vehicle.footprint_radius;
        let (start, yaw, goal) = match scenario.placement {
            Placement::Random => {
                let start = sample_start(&world, r, &mut rng)?;
                let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let goal = sample_goal(&world, start, cfg.episode.goal_range, cfg.episode.goal_radius, r, &mut rng)?;
                (start, yaw, goal)
            }
            Placement::Fixed { start, yaw, goal, yaw_jitter, goal_jitter } => {
                if world.query_collision(start[0], start[1], r) || !world.in_bounds(start[0], start[1]) {
                    return Err(Error::Placement(0));
                }
                let dy = if yaw_jitter > 0.0 { rng.random_range(-yaw_jitter..=yaw_jitter) } else { 0.0 };
                let g = if goal_jitter > 0.0 {
                    let rho = goal_jitter * rng.random::<f64>().sqrt();
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    [goal[0] + rho * phi.cos(), goal[1] + rho * phi.sin()]
                } else {
                    goal
                };
                (start, crate::vehicle::wrap_angle(yaw + dy), g)
            }
        };
        let spacing = cfg.episode.initial_speed * cfg.episode.point_period();
        let (s, c) = yaw.sin_cos();
        let odometry = (0..PAST_LEN)
            .map(|i| {
                let back = (PAST_LEN - 1 - i) as f64 * spacing;
                TrajPoint::new(start[0] - back * c, start[1] - back * s, yaw)
            })
            .collect();
        self.episode = Some(Episode {
            world,
            state: VehicleState { x: start[0], y: start[1], yaw, speed: cfg.episode.initial_speed },
            goal,
            odometry,
            tracker: Tracker::new(cfg.gains, cfg.vehicle),
            ticks: 0,
            decisions: 0,
            done: false,
        });
        self.observe()
    }

    /// Observation of the current state.
    pub fn observe(&self) -> Result<Observation> {
        let ep = self.active()?;
        let pose = ep.state.pose();
        let geometry = render::render_geometry(&ep.world, &pose, &self.config.camera);
        let odo: Vec<TrajPoint> = ep.odometry.iter().copied().collect();
        let mut s_g = pose.to_local(ep.goal);
        let norm = (s_g[0] * s_g[0] + s_g[1] * s_g[1]).sqrt();
        let range = self.config.episode.goal_range;
        if norm > range {
            s_g = [s_g[0] * range / norm, s_g[1] * range / norm];
        }
        Ok(Observation {
            class_map: geometry.class_map,
            past: egocentric_transform(&odo, &pose),
            s_a: [0.0, 0.0],
            s_g,
        })
    }

    /// Execute one decision.
    pub fn step(&mut self, actions: &ActionSequence) -> Result<StepOutcome> {
        let cfg = self.config.clone();
        let ep = self.episode.as_mut().ok_or(Error::NotReset)?;
        if ep.done {
            return Err(Error::EpisodeDone);
        }
        if actions.len() != cfg.horizon {
            return Err(Error::DimensionMismatch { expected: cfg.horizon, got: actions.len() });
        }
        let epc = &cfg.episode;
        let reference_pose = ep.state.pose();
        let pos = |s: &VehicleState| [s.x, s.y];
        let odo: Vec<TrajPoint> = ep.odometry.iter().copied().collect();
        let past = egocentric_transform(&odo, &reference_pose);

        let mut components = RewardComponents::default();
        let mut path = Vec::new();
        let mut collisions = 0;
        let mut boundary_hits = 0;
        let mut reached_goal = false;
        let mut planned = Trajectory::world(vec![]);

        if goal_reached(ep.goal, pos(&ep.state), epc.goal_radius) {
            // Already there: score the current state once, no motion.
            let att = ep.world.surface_attitude(ep.state.x, ep.state.y, ep.state.yaw);
            components = reward::reward_components(
                ep.goal,
                pos(&ep.state),
                &[actions.0[0].steer],
                false,
                att.roll,
                att.pitch,
                epc.goal_radius,
            );
            path.push(pos(&ep.state));
            reached_goal = true;
        } else {
            let ego = get_traj(cfg.horizon + 1, &past, &actions.0, &cfg.rollout)?;
            planned = ego.to_world(&reference_pose);
            for k in 0..cfg.horizon * epc.substeps {
                let tuple = actions.0[k / epc.substeps];
                let cmd = ep.tracker.track(&ep.state, &planned, epc.dt);
                let out = step_dynamics(&ep.state, cmd, epc.dt, &ep.world, &cfg.vehicle);
                let mut next = out.state;
                let blocked_bounds = !ep.world.in_bounds(next.x, next.y);
                if out.collision || blocked_bounds {
                    // Blocked: keep the heading change, stay put, stop.
                    next.x = ep.state.x;
                    next.y = ep.state.y;
                    next.speed = 0.0;
                }
                collisions += out.collision as usize;
                boundary_hits += blocked_bounds as usize;
                ep.state = next;
                ep.ticks += 1;
                if ep.ticks % epc.substeps == 0 {
                    if ep.odometry.len() == PAST_LEN {
                        ep.odometry.pop_front();
                    }
                    ep.odometry.push_back(TrajPoint::new(next.x, next.y, next.yaw));
                }
                let att = ep.world.surface_attitude(next.x, next.y, next.yaw);
                let c = reward::reward_components(
                    ep.goal,
                    pos(&next),
                    &[tuple.steer],
                    out.collision,
                    att.roll,
                    att.pitch,
                    epc.goal_radius,
                );
                components.add(&c);
                path.push(pos(&next));
                if c.goal == GOAL_REWARD {
                    reached_goal = true;
                    break;
                }
                if out.collision && epc.collision_terminal {
                    break;
                }
            }
        }
        ep.decisions += 1;
        let truncated = ep.decisions >= epc.max_decisions;
        let hit_terminal = collisions > 0 && epc.collision_terminal;
        ep.done = reached_goal || truncated || hit_terminal;
        let achieved_world = pos(&ep.state);
        let info = StepInfo {
            reference_pose,
            goal_world: ep.goal,
            achieved_world,
            achieved: reference_pose.to_local(achieved_world),
            path,
            components,
            collisions,
            boundary_hits,
            reached_goal,
            truncated,
            decision: ep.decisions - 1,
            planned,
        };
        let done = ep.done;
        let obs = self.observe()?;
        Ok(StepOutcome {
            obs,
            reward: components.total(&cfg.weights),
            done,
            info,
        })
    }

    /// Randomized RGB render of the current view.
    pub fn render_rgb(&self, rand: &render::RandomizationConfig, seed: u64) -> Result<render::RenderOutput> {
        let ep = self.active()?;
        Ok(render::render(&ep.world, &ep.state.pose(), &self.config.camera, rand, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ClassId, Obstacle, Preset};

    fn meadow_template(config: EnvConfig) -> EnvTemplate {
        EnvTemplate::new(config, &[WorldSpec::empty_flat(Preset::Meadow, 1)]).unwrap()
    }

    #[test]
    fn reset_is_deterministic_and_bounded() {
        let t = meadow_template(EnvConfig::default());
        let mut a = t.instance();
        let mut b = t.instance();
        for seed in 0..50 {
            let oa = a.reset(seed).unwrap();
            assert_eq!(oa, b.reset(seed).unwrap());
            assert!((oa.s_g[0].powi(2) + oa.s_g[1].powi(2)).sqrt() <= 20.0);
            assert_eq!(oa.past.len(), PAST_LEN);
            let last = oa.past.last().unwrap();
            assert!(last.x.abs() < 1e-12 && last.y.abs() < 1e-12);
            assert!((oa.past.last_spacing().unwrap() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn step_errors() {
        let t = meadow_template(EnvConfig::default());
        let mut env = t.instance();
        assert!(matches!(env.step(&ActionSequence::default()), Err(Error::NotReset)));
        env.reset(0).unwrap();
        assert!(matches!(
            env.step(&ActionSequence::repeat(ActionTuple::default(), 3)),
            Err(Error::DimensionMismatch { expected: 5, got: 3 })
        ));
    }

    #[test]
    fn step_after_done_errors() {
        let mut cfg = EnvConfig::default();
        cfg.episode.max_decisions = 1;
        let mut env = meadow_template(cfg).instance();
        env.reset(3).unwrap();
        let out = env.step(&ActionSequence::repeat(ActionTuple::default(), 5)).unwrap();
        assert!(out.done);
        assert!(matches!(env.step(&ActionSequence::repeat(ActionTuple::default(), 5)), Err(Error::EpisodeDone)));
    }

    fn straight_scene(obstacles: Vec<Obstacle>, goal: [f64; 2]) -> EnvTemplate {
        let world = World::flat_with_obstacles(WorldSpec::empty_flat(Preset::Meadow, 0), obstacles).unwrap();
        EnvTemplate::from_scenarios(
            EnvConfig::default(),
            vec![Scenario {
                world: Arc::new(world),
                placement: Placement::Fixed { start: [40.0, 50.0], yaw: 0.0, goal, yaw_jitter: 0.0, goal_jitter: 0.0 },
            }],
        )
        .unwrap()
    }

    #[test]
    fn already_at_goal_is_immediately_done() {
        let mut env = straight_scene(vec![], [41.0, 50.0]).instance();
        env.reset(0).unwrap();
        let out = env.step(&ActionSequence::repeat(ActionTuple::default(), 5)).unwrap();
        assert!(out.done && out.info.reached_goal);
        assert_eq!(out.info.components.goal, 100.0);
        assert_eq!(out.info.path.len(), 1);
    }

    #[test]
    fn straight_drive_reaches_goal_ahead() {
        let mut env = straight_scene(vec![], [50.0, 50.0]).instance();
        env.reset(0).unwrap();
        let acts = ActionSequence::repeat(ActionTuple::new(0.0, 0.1), 5);
        let mut decisions = 0;
        loop {
            let out = env.step(&acts).unwrap();
            decisions += 1;
            if out.done {
                assert!(out.info.reached_goal);
                break;
            }
        }
        // 8 m at no more than v_max with a 2 m/s start needs at least 1 s.
        assert!((1..=6).contains(&decisions), "{decisions}");
    }

    #[test]
    fn driving_into_rock_collides() {
        let rock = Obstacle { class: ClassId::Rocks, center: [46.0, 50.0], radius: 1.0, height: 1.0 };
        let mut env = straight_scene(vec![rock], [60.0, 50.0]).instance();
        env.reset(0).unwrap();
        let acts = ActionSequence::repeat(ActionTuple::new(0.0, 0.2), 5);
        let mut hit = false;
        for _ in 0..5 {
            let out = env.step(&acts).unwrap();
            if out.info.collision() {
                hit = true;
                assert!(out.info.components.collision <= -1.0);
                assert_eq!(out.info.components.collision, -(out.info.collisions as f64));
                break;
            }
        }
        assert!(hit);
        let s = env.state().unwrap();
        assert!(!env.world().unwrap().query_collision(s.x, s.y, 1.5));
    }

    #[test]
    fn episode_is_deterministic() {
        let t = EnvTemplate::new(EnvConfig::default(), &[WorldSpec::new(Preset::Landscape, 5)]).unwrap();
        let run = || {
            let mut env = t.instance();
            env.reset(77).unwrap();
            let mut rewards = vec![];
            for k in 0..6 {
                let a = ActionSequence::repeat(ActionTuple::new(0.3 * ((k % 3) as f64 - 1.0), 0.3), 5);
                let out = env.step(&a).unwrap();
                rewards.push((out.reward, out.info.achieved_world, out.obs.s_g));
                if out.done {
                    break;
                }
            }
            rewards
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn horizon_budget() {
        assert_eq!(EpisodeConfig::default().for_horizon(5).max_decisions, 40);
        assert_eq!(EpisodeConfig::default().for_horizon(1).max_decisions, 200);
        assert_eq!(EpisodeConfig::default().for_horizon(10).max_decisions, 20);
        let mut c = EnvConfig::default();
        c.gains.point_period = 0.2;
        assert!(c.validate().is_err());
    }
}
