use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{featurize, Policy, RandomPolicy};
use crate::env::{Env, EnvTemplate, EpisodeLogRecord};
use crate::error::{Error, Result};
use crate::replay::{HerConfig, ReplayBuffer, Sampled, Transition};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub ret: f64,
    pub success: bool,
    pub decisions: usize,
    pub collided: bool,
}

fn episode_inner(
    policy: &dyn Policy,
    env: &mut Env,
    seed: u64,
    mut log: Option<(&mut Vec<EpisodeLogRecord>, u64)>,
) -> Result<EpisodeSummary> {
    if policy.horizon() != env.config().horizon {
        return Err(Error::DimensionMismatch { expected: env.config().horizon, got: policy.horizon() });
    }
    let mut obs = env.reset(seed)?;
    let mut prng = rng::stream(seed, 21);
    let mut summary = EpisodeSummary { ret: 0.0, success: false, decisions: 0, collided: false };
    loop {
        let actions = policy.act(&obs, &mut prng)?;
        let out = env.step(&actions)?;
        summary.ret += out.reward;
        summary.decisions += 1;
        summary.collided |= out.info.collision();
        summary.success |= out.info.reached_goal;
        if let Some((records, id)) = log.as_mut() {
            records.push(EpisodeLogRecord::new(*id, env.state()?, &actions, &out));
        }
        if out.done {
            return Ok(summary);
        }
        obs = out.obs;
    }
}

/// Roll one episode to termination.
pub fn run_episode(policy: &dyn Policy, env: &mut Env, seed: u64) -> Result<EpisodeSummary> {
    episode_inner(policy, env, seed, None)
}

/// Like [`run_episode`], also returning one log record per decision.
pub fn run_episode_logged(
    policy: &dyn Policy,
    env: &mut Env,
    seed: u64,
    episode: u64,
) -> Result<(EpisodeSummary, Vec<EpisodeLogRecord>)> {
    let mut records = Vec::new();
    let s = episode_inner(policy, env, seed, Some((&mut records, episode)))?;
    Ok((s, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    /// Over successful episodes only; `None` without successes.
    pub mean_decisions_to_goal: Option<f64>,
    pub collision_rate: f64,
}

impl EvalReport {
    pub fn from_summaries(s: &[EpisodeSummary]) -> Self {
        let n = s.len().max(1) as f64;
        let succ: Vec<&EpisodeSummary> = s.iter().filter(|e| e.success).collect();
        EvalReport {
            episodes: s.len(),
            success_rate: succ.len() as f64 / n,
            mean_return: s.iter().map(|e| e.ret).sum::<f64>() / n,
            mean_decisions_to_goal: (!succ.is_empty())
                .then(|| succ.iter().map(|e| e.decisions as f64).sum::<f64>() / succ.len() as f64),
            collision_rate: s.iter().filter(|e| e.collided).count() as f64 / n,
        }
    }
}

/// Episode seed `k` of an evaluation seeded with `seed`.
pub fn episode_seed(seed: u64, k: usize) -> u64 {
    rng::derive(seed, k as u64)
}

pub(crate) fn summaries(
    policy: &dyn Policy,
    template: &EnvTemplate,
    seeds: &[u64],
) -> Result<Vec<EpisodeSummary>> {
    seeds
        .par_iter()
        .map(|&s| run_episode(policy, &mut template.instance(), s))
        .collect()
}

/// `n` independent episodes on seeds derived from `seed`. Same seed, same
/// report; episodes with the same seed see the same world, start and goal
/// whatever the policy.
pub fn evaluate(policy: &dyn Policy, template: &EnvTemplate, n: usize, seed: u64) -> Result<EvalReport> {
    if n == 0 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let seeds: Vec<u64> = (0..n).map(|k| episode_seed(seed, k)).collect();
    Ok(EvalReport::from_summaries(&summaries(policy, template, &seeds)?))
}

/// Fill `buffer` with random-policy episodes from live environments, then
/// draw one hindsight-relabeled batch.
pub fn replay_fill_and_sample_smoke(
    template: &EnvTemplate,
    buffer: &mut ReplayBuffer,
    her: &HerConfig,
    episodes: usize,
    batch: usize,
    seed: u64,
) -> Result<Vec<Sampled>> {
    let cfg = template.config().clone();
    let policy = RandomPolicy { horizon: cfg.horizon };
    let mut env = template.instance();
    for e in 0..episodes {
        let s = episode_seed(seed, e);
        let mut prng = rng::stream(s, 21);
        let mut obs = env.reset(s)?;
        let mut f = featurize(&obs);
        loop {
            let actions = policy.act(&obs, &mut prng)?;
            let out = env.step(&actions)?;
            let next_f = featurize(&out.obs);
            buffer.push(Transition::from_step(
                e as u64,
                f,
                actions,
                &out,
                next_f.clone(),
                env.state()?.pose(),
                cfg.weights,
                cfg.episode.goal_radius,
            ))?;
            if out.done {
                break;
            }
            obs = out.obs;
            f = next_f;
        }
    }
    buffer.sample(batch, her, &mut rng::stream(seed, 31))
}
