//! Ready-made scenarios shared by the command line and the test suites.

use std::sync::Arc;

use crate::env::{EnvConfig, EnvTemplate, Placement, Scenario};
use crate::error::Result;
use crate::learner::ScriptedGoalPolicy;
use crate::metrics::{collect_drive_log, DriveLog, LogModality};
use crate::rng;
use crate::world::{ClassId, Obstacle, Preset, World, WorldSpec};

/// Start and goal of the rock-avoidance scene; the rock sits halfway.
pub const ROCK_SCENE_START: [f64; 2] = [50.0, 50.0];
pub const ROCK_SCENE_GOAL: [f64; 2] = [64.0, 50.0];
pub const ROCK_SCENE_ROCK: [f64; 2] = [57.0, 50.0];
pub const ROCK_SCENE_RADIUS: f64 = 1.5;

/// Online settings used for goal-reaching: default env with a 15 m goal range.
pub fn goal_reaching_config(horizon: usize) -> EnvConfig {
    let mut cfg = EnvConfig::with_horizon(horizon);
    cfg.episode.goal_range = 15.0;
    cfg
}

pub fn empty_meadow() -> Result<Arc<World>> {
    Ok(Arc::new(World::flat_with_obstacles(WorldSpec::empty_flat(Preset::Meadow, 0), vec![])?))
}

/// Flat meadow with a single rock straight between start and goal.
pub fn rock_world() -> Result<Arc<World>> {
    let rock = Obstacle { class: ClassId::Rocks, center: ROCK_SCENE_ROCK, radius: ROCK_SCENE_RADIUS, height: 1.0 };
    Ok(Arc::new(World::flat_with_obstacles(WorldSpec::empty_flat(Preset::Meadow, 0), vec![rock])?))
}

/// The rock scene. Jitter 0 gives the nominal constructed episode.
pub fn rock_scenario(yaw_jitter: f64, goal_jitter: f64) -> Result<Scenario> {
    Ok(Scenario {
        world: rock_world()?,
        placement: Placement::Fixed {
            start: ROCK_SCENE_START,
            yaw: 0.0,
            goal: ROCK_SCENE_GOAL,
            yaw_jitter,
            goal_jitter,
        },
    })
}

/// Random goals on an empty flat meadow.
pub fn meadow_template(cfg: EnvConfig) -> Result<EnvTemplate> {
    EnvTemplate::from_scenarios(cfg, vec![Scenario { world: empty_meadow()?, placement: Placement::Random }])
}

/// `meadow_weight` random-goal meadow scenarios plus one jittered rock scene.
pub fn rock_training_template(cfg: EnvConfig, meadow_weight: usize) -> Result<EnvTemplate> {
    let meadow = empty_meadow()?;
    let mut sc: Vec<Scenario> =
        (0..meadow_weight).map(|_| Scenario { world: meadow.clone(), placement: Placement::Random }).collect();
    sc.push(rock_scenario(0.3, 2.0)?);
    EnvTemplate::from_scenarios(cfg, sc)
}

pub fn rock_eval_template(cfg: EnvConfig) -> Result<EnvTemplate> {
    EnvTemplate::from_scenarios(cfg, vec![rock_scenario(0.0, 0.0)?])
}

/// Class-map drive logs from the scripted goal driver on an empty meadow,
/// log `i` seeded with `derive(seed, i)`.
pub fn scripted_drive_logs(cfg: EnvConfig, count: usize, seed: u64) -> Result<Vec<DriveLog>> {
    let template = EnvTemplate::new(cfg, &[WorldSpec::empty_flat(Preset::Meadow, 3)])?;
    let policy = ScriptedGoalPolicy::new(template.config().horizon);
    (0..count)
        .map(|i| collect_drive_log(&template, &policy, rng::derive(seed, i as u64), i as u64, &LogModality::ClassMap, 1))
        .collect()
}
