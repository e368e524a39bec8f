//! Desk-scale off-road driving simulation and evaluation toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`world`]: procedural terrain, obstacles, and collision/attitude queries.
//! - [`render`]: per-pixel raycasting into randomized RGB, class map, depth and
//!   obstacle mask.
//! - [`vehicle`]: trajectory rollout from steering/acceleration tuples, bicycle
//!   kinematics, trajectory tracking, frame transforms.
//! - [`env`]: the goal-conditioned episodic environment, reward, and the sensor
//!   message synchronizer.
//! - [`replay`]: transition storage with hindsight goal relabeling.
//! - [`learner`]: featurization, policies, cross-entropy-method training, online
//!   evaluation.
//! - [`metrics`]: offline dataset construction and the GT / ATE / GT_G / L2
//!   trajectory metrics.
//! - [`dataset`]: on-disk formats shared with external tools.

pub mod codec;
pub mod dataset;
pub mod env;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod render;
pub mod replay;
pub mod rng;
pub mod scenes;
pub mod vehicle;
pub mod world;

pub use env::{
    ActionSequence, Env, EnvConfig, EnvTemplate, EpisodeConfig, Observation, Placement,
    RewardComponents, RewardWeights, Scenario, StepInfo, StepOutcome,
};
pub use error::{Error, Result};
pub use learner::{CemConfig, EvalReport, FeatureVector, Policy, PolicyParams};
pub use metrics::{MetricReport, MetricSet, OfflineRecord};
pub use render::{CameraModel, ClassMap, RandomizationConfig, RenderOutput};
pub use replay::{HerConfig, ReplayBuffer, Transition};
pub use vehicle::{ActionTuple, Pose2, RolloutConfig, Trajectory, VehicleState};
pub use world::{ClassId, Preset, World, WorldSpec};
