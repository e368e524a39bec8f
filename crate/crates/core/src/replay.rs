//! Transition storage with hindsight goal relabeling ("future" strategy).
//!
//! Each transition keeps its reward split into components plus the vehicle
//! path it drove (world frame, one point per physics step), so the sparse
//! goal term can be recomputed exactly for any substitute goal without
//! re-simulating. Everything else (features, actions, non-goal reward terms)
//! is carried through untouched.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::env::reward::{goal_term, GOAL_REWARD};
use crate::env::{ActionSequence, RewardComponents, RewardWeights, StepOutcome};
use crate::error::{Error, Result};
use crate::learner::FeatureVector;
use crate::vehicle::{ActionTuple, Pose2};

pub const REPLAY_MAGIC: &[u8; 4] = b"S2SR";
pub const REPLAY_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub episode: u64,
    pub step: usize,
    pub obs: FeatureVector,
    pub next_obs: FeatureVector,
    pub actions: ActionSequence,
    /// Egocentric goal in the reference frame.
    pub goal: [f64; 2],
    pub goal_world: [f64; 2],
    pub reference_pose: Pose2,
    /// Pose the next decision is made from.
    pub next_pose: Pose2,
    /// Egocentric achieved offset at the end of the decision.
    pub achieved: [f64; 2],
    pub achieved_world: [f64; 2],
    /// World position after each physics step.
    pub path: Vec<[f64; 2]>,
    pub components: RewardComponents,
    pub weights: RewardWeights,
    pub goal_radius: f64,
    pub reward: f64,
    pub done: bool,
    /// Terminal for reasons other than the goal (budget, terminal collision).
    pub done_other: bool,
}

impl Transition {
    /// Build from an environment step. `next_pose` is the vehicle pose after
    /// the step.
    pub fn from_step(
        episode: u64,
        obs: FeatureVector,
        actions: ActionSequence,
        out: &StepOutcome,
        next_obs: FeatureVector,
        next_pose: Pose2,
        weights: RewardWeights,
        goal_radius: f64,
    ) -> Self {
        let info = &out.info;
        Transition {
            episode,
            step: info.decision,
            obs,
            next_obs,
            actions,
            goal: info.reference_pose.to_local(info.goal_world),
            goal_world: info.goal_world,
            reference_pose: info.reference_pose,
            next_pose,
            achieved: info.achieved,
            achieved_world: info.achieved_world,
            path: info.path.clone(),
            components: info.components,
            weights,
            goal_radius,
            reward: out.reward,
            done: out.done,
            done_other: out.done && !info.reached_goal,
        }
    }

    /// Sum of the goal term over the stored path for `goal_world`, stopping
    /// at the first physics step that reaches it.
    pub fn goal_sum(&self, goal_world: [f64; 2]) -> (f64, bool) {
        let mut sum = 0.0;
        for &p in &self.path {
            let term = goal_term(goal_world, p, self.goal_radius);
            sum += term;
            if term == GOAL_REWARD {
                return (sum, true);
            }
        }
        (sum, false)
    }

    /// Replace the goal with a world point. Only the goal, the goal reward
    /// term, the reward total and `done` change.
    pub fn relabel_to(&self, goal_world: [f64; 2]) -> Transition {
        let (goal_sum, hit) = self.goal_sum(goal_world);
        let components = RewardComponents { goal: goal_sum, ..self.components };
        Transition {
            goal: self.reference_pose.to_local(goal_world),
            goal_world,
            components,
            reward: components.total(&self.weights),
            done: hit || self.done_other,
            ..self.clone()
        }
    }

    /// Relabel with the position achieved at the end of `future`, which must
    /// come from the same episode at this step or later (its achieved state
    /// is strictly later than this transition's start).
    pub fn relabel(&self, future: &Transition) -> Result<Transition> {
        if future.episode != self.episode {
            return Err(Error::InvalidRelabel(format!(
                "goal source from episode {} cannot relabel episode {}",
                future.episode, self.episode
            )));
        }
        if future.step < self.step {
            return Err(Error::InvalidRelabel(format!(
                "goal source step {} precedes step {}",
                future.step, self.step
            )));
        }
        Ok(self.relabel_to(future.achieved_world))
    }

    /// Observation features with the goal slots set to this transition's
    /// (possibly relabeled) goal.
    pub fn obs_with_goal(&self) -> FeatureVector {
        self.obs.with_goal(self.goal)
    }

    pub fn next_obs_with_goal(&self) -> FeatureVector {
        self.next_obs.with_goal(self.next_pose.to_local(self.goal_world))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HerStrategy {
    /// Goal = achieved position at a uniformly chosen step `j >= t` of the
    /// same episode.
    Future,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerConfig {
    pub relabel_ratio: f64,
    pub strategy: HerStrategy,
}

impl Default for HerConfig {
    fn default() -> Self {
        HerConfig {
            relabel_ratio: 0.8,
            strategy: HerStrategy::Future,
        }
    }
}

impl HerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.relabel_ratio) {
            return Err(Error::InvalidConfig(format!(
                "relabel_ratio must be in [0, 1], got {}",
                self.relabel_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub transition: Transition,
    /// Step whose achieved position became the goal, if relabeled.
    pub source_step: Option<usize>,
}

impl Sampled {
    pub fn relabeled(&self) -> bool {
        self.source_step.is_some()
    }
}

/// FIFO buffer with a per-episode index of stored steps.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    /// Sequence number of `items[0]`.
    first_seq: u64,
    /// Per episode: sequence numbers in step order.
    episodes: HashMap<u64, VecDeque<u64>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be >= 1".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            first_seq: 0,
            episodes: HashMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Stored steps of an episode, in order.
    pub fn episode_steps(&self, episode: u64) -> Vec<usize> {
        self.episodes
            .get(&episode)
            .map(|seqs| seqs.iter().map(|&s| self.get_seq(s).step).collect())
            .unwrap_or_default()
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    fn get_seq(&self, seq: u64) -> &Transition {
        &self.items[(seq - self.first_seq) as usize]
    }

    /// Append; evicts the oldest transition at capacity. Steps of one
    /// episode must arrive contiguously.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if let Some(&last) = self.episodes.get(&t.episode).and_then(|s| s.back()) {
            let expected = self.get_seq(last).step + 1;
            if t.step != expected {
                return Err(Error::NonContiguousStep {
                    episode: t.episode,
                    expected: expected as u64,
                    got: t.step as u64,
                });
            }
        }
        if self.items.len() == self.capacity {
            let old = self.items.pop_front().expect("capacity >= 1");
            let seqs = self.episodes.get_mut(&old.episode).expect("indexed");
            debug_assert_eq!(seqs.front(), Some(&self.first_seq));
            seqs.pop_front();
            if seqs.is_empty() {
                self.episodes.remove(&old.episode);
            }
            self.first_seq += 1;
        }
        let seq = self.first_seq + self.items.len() as u64;
        self.episodes.entry(t.episode).or_default().push_back(seq);
        self.items.push_back(t);
        Ok(())
    }

    /// Uniform sample of `batch_size` transitions, each relabeled
    /// independently with probability `her.relabel_ratio`.
    pub fn sample(&self, batch_size: usize, her: &HerConfig, rng: &mut impl Rng) -> Result<Vec<Sampled>> {
        her.validate()?;
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let mut out = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let idx = rng.random_range(0..self.items.len());
            let t = &self.items[idx];
            let relabel = rng.random::<f64>() < her.relabel_ratio;
            if !relabel {
                out.push(Sampled { transition: t.clone(), source_step: None });
                continue;
            }
            let seqs = &self.episodes[&t.episode];
            let seq = self.first_seq + idx as u64;
            let pos = seqs.iter().position(|&s| s == seq).expect("indexed");
            let pick = rng.random_range(pos..seqs.len());
            let future = self.get_seq(seqs[pick]);
            out.push(Sampled {
                transition: t.relabel(future)?,
                source_step: Some(future.step),
            });
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(REPLAY_MAGIC, REPLAY_VERSION);
        w.u64(self.capacity as u64);
        w.len_prefix(self.items.len());
        for t in &self.items {
            w.u64(t.episode);
            w.u64(t.step as u64);
            w.f32s(&t.obs.0);
            w.f32s(&t.next_obs.0);
            w.len_prefix(t.actions.len());
            for a in t.actions.tuples() {
                w.f64(a.steer);
                w.f64(a.accel);
            }
            for v in [t.goal, t.goal_world, t.achieved, t.achieved_world] {
                w.f64s(&v);
            }
            for p in [t.reference_pose, t.next_pose] {
                w.f64s(&[p.x, p.y, p.yaw]);
            }
            w.len_prefix(t.path.len());
            for p in &t.path {
                w.f64s(p);
            }
            let c = t.components;
            w.f64s(&[c.goal, c.upright, c.steer, c.collision]);
            let ws = t.weights;
            w.f64s(&[ws.goal, ws.upright, ws.steer, ws.collision]);
            w.f64(t.goal_radius);
            w.f64(t.reward);
            w.bool(t.done);
            w.bool(t.done_other);
        }
        w.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::with_header(buf, REPLAY_MAGIC)?;
        if version != REPLAY_VERSION {
            return Err(Error::Format(format!("unsupported replay version {version}")));
        }
        let capacity = r.u64()? as usize;
        let n = r.len_prefix()?;
        let mut buffer = ReplayBuffer::new(capacity)?;
        let pair = |r: &mut Reader| -> Result<[f64; 2]> { Ok([r.f64()?, r.f64()?]) };
        let pose = |r: &mut Reader| -> Result<Pose2> { Ok(Pose2::new(r.f64()?, r.f64()?, r.f64()?)) };
        for _ in 0..n {
            let episode = r.u64()?;
            let step = r.u64()? as usize;
            let obs = FeatureVector(r.f32s()?);
            let next_obs = FeatureVector(r.f32s()?);
            let na = r.len_prefix()?;
            let mut actions = Vec::with_capacity(na);
            for _ in 0..na {
                actions.push(ActionTuple { steer: r.f64()?, accel: r.f64()? });
            }
            let vec2 = |r: &mut Reader| -> Result<[f64; 2]> {
                if r.len_prefix()? != 2 {
                    return Err(Error::Format("bad vector length".into()));
                }
                pair(r)
            };
            let goal = vec2(&mut r)?;
            let goal_world = vec2(&mut r)?;
            let achieved = vec2(&mut r)?;
            let achieved_world = vec2(&mut r)?;
            let vec3 = |r: &mut Reader| -> Result<Pose2> {
                if r.len_prefix()? != 3 {
                    return Err(Error::Format("bad pose length".into()));
                }
                pose(r)
            };
            let reference_pose = vec3(&mut r)?;
            let next_pose = vec3(&mut r)?;
            let np = r.len_prefix()?;
            let mut path = Vec::with_capacity(np);
            for _ in 0..np {
                path.push(vec2(&mut r)?);
            }
            let c = r.f64s()?;
            let ws = r.f64s()?;
            if c.len() != 4 || ws.len() != 4 {
                return Err(Error::Format("bad reward block".into()));
            }
            let t = Transition {
                episode,
                step,
                obs,
                next_obs,
                actions: ActionSequence(actions),
                goal,
                goal_world,
                reference_pose,
                next_pose,
                achieved,
                achieved_world,
                path,
                components: RewardComponents { goal: c[0], upright: c[1], steer: c[2], collision: c[3] },
                weights: RewardWeights { goal: ws[0], upright: ws[1], steer: ws[2], collision: ws[3] },
                goal_radius: r.f64()?,
                reward: r.f64()?,
                done: r.bool()?,
                done_other: r.bool()?,
            };
            buffer.push(t)?;
        }
        r.finish()?;
        Ok(buffer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    /// One JSON object per transition (features omitted).
    pub fn to_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            episode: u64,
            t: usize,
            actions: &'a [ActionTuple],
            goal: [f64; 2],
            achieved: [f64; 2],
            components: RewardComponents,
            reward: f64,
            done: bool,
        }
        let mut s = String::new();
        for t in &self.items {
            s.push_str(&serde_json::to_string(&Line {
                episode: t.episode,
                t: t.step,
                actions: t.actions.tuples(),
                goal: t.goal,
                achieved: t.achieved,
                components: t.components,
                reward: t.reward,
                done: t.done,
            })?);
            s.push('\n');
        }
        Ok(s)
    }
}
