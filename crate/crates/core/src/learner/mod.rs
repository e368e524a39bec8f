//! Featurization, policies, population-based training and online evaluation.

mod cem;
mod eval;

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::env::{ActionSequence, Observation};
use crate::error::{Error, Result};
use crate::render::ClassMap;
use crate::rng::SimRng;
use crate::vehicle::{ActionTuple, PAST_LEN};
use crate::world::ClassId;

pub use cem::{thread_count, train_cem, train_cem_with, CemConfig, CurveRow, TrainOutput};
pub use eval::{
    episode_seed, evaluate, replay_fill_and_sample_smoke, run_episode, run_episode_logged, EpisodeSummary, EvalReport,
};

/// Pooled grid side.
pub const POOL: usize = 16;
pub const IMAGE_FEATURES: usize = POOL * POOL * ClassId::COUNT;
/// Image cells, past trajectory, `s_a`, `s_g`.
pub const FEATURE_LEN: usize = IMAGE_FEATURES + PAST_LEN * 3 + 2 + 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f32>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with the trailing goal slots replaced.
    pub fn with_goal(&self, goal: [f64; 2]) -> FeatureVector {
        let mut v = self.0.clone();
        let n = v.len();
        if n >= 2 {
            v[n - 2] = goal[0] as f32;
            v[n - 1] = goal[1] as f32;
        }
        FeatureVector(v)
    }
}

/// Class fractions of each cell of an even `POOL x POOL` partition, cell-major
/// in class-index order.
pub fn pool_class_map(cm: &ClassMap) -> Vec<f32> {
    let mut out = vec![0.0f32; IMAGE_FEATURES];
    for ci in 0..POOL {
        let r0 = ci * cm.height / POOL;
        let r1 = (ci + 1) * cm.height / POOL;
        for cj in 0..POOL {
            let c0 = cj * cm.width / POOL;
            let c1 = (cj + 1) * cm.width / POOL;
            let mut counts = [0u32; ClassId::COUNT];
            for r in r0..r1 {
                for c in c0..c1 {
                    counts[cm.get(r, c).index() as usize] += 1;
                }
            }
            let total = ((r1 - r0) * (c1 - c0)).max(1) as f32;
            let base = (ci * POOL + cj) * ClassId::COUNT;
            for k in 0..ClassId::COUNT {
                out[base + k] = counts[k] as f32 / total;
            }
        }
    }
    out
}

/// Pooled class map, flattened `(x, y, yaw)` past points, `s_a`, `s_g`.
pub fn featurize(obs: &Observation) -> FeatureVector {
    let mut v = pool_class_map(&obs.class_map);
    v.reserve(FEATURE_LEN - IMAGE_FEATURES);
    for p in obs.past.points.iter().take(PAST_LEN) {
        v.extend([p.x as f32, p.y as f32, p.yaw as f32]);
    }
    for _ in obs.past.len()..PAST_LEN {
        v.extend([0.0; 3]);
    }
    v.extend([obs.s_a[0] as f32, obs.s_a[1] as f32, obs.s_g[0] as f32, obs.s_g[1] as f32]);
    FeatureVector(v)
}

/// Maps observations to action sequences.
pub trait Policy: Sync {
    fn horizon(&self) -> usize;
    fn act(&self, obs: &Observation, rng: &mut SimRng) -> Result<ActionSequence>;
}

/// Fixed input scaling applied inside the network.
fn input_scale(i: usize) -> f64 {
    if i < IMAGE_FEATURES {
        1.0 / 16.0
    } else {
        0.1
    }
}

pub const POLICY_MAGIC: &[u8; 4] = b"S2SP";
pub const POLICY_VERSION: u16 = 1;

/// Two-layer tanh network from features to `2A` outputs; steering is
/// `pi/4 * tanh`, acceleration is a sigmoid.
///
/// Parameter layout: `W1 (hidden x input)`, `b1`, `W2 (2A x hidden)`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub horizon: usize,
    pub input: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl PolicyParams {
    pub fn param_count(horizon: usize, input: usize, hidden: usize) -> usize {
        hidden * input + hidden + 2 * horizon * hidden + 2 * horizon
    }

    pub fn zeros(horizon: usize, input: usize, hidden: usize) -> Self {
        PolicyParams {
            horizon,
            input,
            hidden,
            params: vec![0.0; Self::param_count(horizon, input, hidden)],
        }
    }

    pub fn from_vec(horizon: usize, input: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(horizon, input, hidden);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("policy parameters must be finite".into()));
        }
        Ok(PolicyParams { horizon, input, hidden, params })
    }

    /// Raw network outputs.
    fn forward(&self, x: &[f32]) -> Vec<f64> {
        let (h, n) = (self.hidden, self.input);
        let (w1, rest) = self.params.split_at(h * n);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(2 * self.horizon * h);
        let xs: Vec<f64> = x.iter().enumerate().map(|(i, &v)| v as f64 * input_scale(i)).collect();
        let hidden: Vec<f64> = (0..h)
            .map(|j| {
                let row = &w1[j * n..(j + 1) * n];
                (b1[j] + row.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>()).tanh()
            })
            .collect();
        (0..2 * self.horizon)
            .map(|k| b2[k] + w2[k * h..(k + 1) * h].iter().zip(&hidden).map(|(w, z)| w * z).sum::<f64>())
            .collect()
    }

    /// Deterministic action sequence for a feature vector.
    pub fn act_features(&self, features: &FeatureVector) -> Result<ActionSequence> {
        if features.len() != self.input {
            return Err(Error::DimensionMismatch { expected: self.input, got: features.len() });
        }
        let z = self.forward(&features.0);
        Ok(ActionSequence(
            (0..self.horizon)
                .map(|i| {
                    let steer = FRAC_PI_4 * z[2 * i].tanh();
                    let accel = 1.0 / (1.0 + (-z[2 * i + 1]).exp());
                    ActionTuple::new(steer, accel)
                })
                .collect(),
        ))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(POLICY_MAGIC, POLICY_VERSION);
        w.u32(self.horizon as u32);
        w.u32(self.input as u32);
        w.u32(self.hidden as u32);
        w.f64s(&self.params);
        w.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::with_header(buf, POLICY_MAGIC)?;
        if version != POLICY_VERSION {
            return Err(Error::Format(format!("unsupported policy version {version}")));
        }
        let horizon = r.u32()? as usize;
        let input = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let params = r.f64s()?;
        r.finish()?;
        PolicyParams::from_vec(horizon, input, hidden, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Policy for PolicyParams {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn act(&self, obs: &Observation, _rng: &mut SimRng) -> Result<ActionSequence> {
        self.act_features(&featurize(obs))
    }
}

/// Uniform random actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomPolicy {
    pub horizon: usize,
}

impl Policy for RandomPolicy {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn act(&self, _obs: &Observation, rng: &mut SimRng) -> Result<ActionSequence> {
        Ok(ActionSequence(
            (0..self.horizon)
                .map(|_| ActionTuple::new(rng.random_range(-FRAC_PI_4..=FRAC_PI_4), rng.random::<f64>()))
                .collect(),
        ))
    }
}

/// Hand-written goal seeker: steers at the goal bearing and holds a target
/// speed. When the goal sits inside its turning circle it drives straight
/// until there is room to turn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedGoalPolicy {
    pub horizon: usize,
    pub target_speed: f64,
    /// Seconds per action tuple.
    pub point_period: f64,
    pub turn_radius: f64,
}

impl ScriptedGoalPolicy {
    pub fn new(horizon: usize) -> Self {
        ScriptedGoalPolicy {
            horizon,
            target_speed: 4.0,
            point_period: 0.1,
            turn_radius: 4.5,
        }
    }
}

impl Policy for ScriptedGoalPolicy {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn act(&self, obs: &Observation, _rng: &mut SimRng) -> Result<ActionSequence> {
        let [gx, gy] = obs.s_g;
        let bearing = gy.atan2(gx);
        let dist = (gx * gx + gy * gy).sqrt();
        let steer = if bearing.abs() > 1.0 && dist < 2.5 * self.turn_radius {
            0.0
        } else {
            bearing
        };
        let spacing = obs.past.last_spacing().unwrap_or(0.0);
        let boost = (self.target_speed * self.point_period - spacing).clamp(0.0, 1.0);
        Ok(ActionSequence(
            (0..self.horizon)
                .map(|i| ActionTuple::new(steer, if i == 0 { boost } else { 0.0 }))
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::vehicle::{TrajPoint, Trajectory};
    use proptest::prelude::*;
    use rand::Rng;

    fn obs_with(cm: ClassMap, s_g: [f64; 2]) -> Observation {
        Observation {
            class_map: cm,
            past: Trajectory::ego((0..10).map(|i| TrajPoint::new(i as f64 * 0.2 - 1.8, 0.0, 0.0)).collect()),
            s_a: [0.0; 2],
            s_g,
        }
    }

    #[test]
    fn feature_length_and_ground_cells() {
        let f = featurize(&obs_with(ClassMap::filled(32, 32, ClassId::Ground), [5.0, 1.0]));
        assert_eq!(f.len(), 1570);
        for cell in f.0[..IMAGE_FEATURES].chunks(6) {
            assert_eq!(cell, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        }
        assert_eq!(&f.0[FEATURE_LEN - 2..], &[5.0, 1.0]);
    }

    #[test]
    fn checkerboard_cells_split_evenly() {
        // One-pixel checkerboard: every 2x2 pooled cell holds two of each class.
        let idx: Vec<u8> = (0..32 * 32)
            .map(|p| if (p / 32 + p % 32) % 2 == 0 { 1 } else { 3 })
            .collect();
        let f = featurize(&obs_with(ClassMap::from_indices(32, 32, &idx).unwrap(), [1.0, 0.0]));
        for cell in f.0[..IMAGE_FEATURES].chunks(6) {
            assert_eq!(cell, &[0.0, 0.5, 0.0, 0.5, 0.0, 0.0]);
        }
    }

    #[test]
    fn zero_params_give_centre_actions() {
        let p = PolicyParams::zeros(5, FEATURE_LEN, 8);
        let f = featurize(&obs_with(ClassMap::filled(32, 32, ClassId::Sky), [3.0, 4.0]));
        let a = p.act_features(&f).unwrap();
        assert_eq!(a.len(), 5);
        for t in a.tuples() {
            assert_eq!(*t, ActionTuple { steer: 0.0, accel: 0.5 });
        }
        assert!(matches!(
            p.act_features(&FeatureVector(vec![0.0; 3])),
            Err(Error::DimensionMismatch { expected: 1570, got: 3 })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut g = rng::stream(3, 0);
        let n = PolicyParams::param_count(10, 20, 4);
        let p = PolicyParams::from_vec(10, 20, 4, (0..n).map(|_| g.random::<f64>() - 0.5).collect()).unwrap();
        assert_eq!(PolicyParams::from_bytes(&p.to_bytes()).unwrap(), p);
        assert!(PolicyParams::from_bytes(&p.to_bytes()[..20]).is_err());
    }

    proptest! {
        #[test]
        fn actions_always_in_bounds(seed in 0u64..10_000, scale in 0.1..50.0f64) {
            let mut g = rng::stream(seed, 0);
            let n = PolicyParams::param_count(5, 12, 3);
            let p = PolicyParams::from_vec(5, 12, 3, (0..n).map(|_| scale * (g.random::<f64>() - 0.5)).collect()).unwrap();
            let f = FeatureVector((0..12).map(|_| (scale * (g.random::<f64>() - 0.5)) as f32).collect());
            let a = p.act_features(&f).unwrap();
            prop_assert!(a.tuples().iter().all(|t| t.in_bounds()));
            prop_assert_eq!(a, p.act_features(&f).unwrap());
        }
    }
}
