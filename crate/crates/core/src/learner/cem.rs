//! Cross-entropy method over [`PolicyParams`] with a diagonal Gaussian.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{episode_seed, summaries};
use super::{PolicyParams, FEATURE_LEN};
use crate::env::EnvTemplate;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CemConfig {
    /// Fresh samples per iteration.
    pub population: usize,
    pub elite_frac: f64,
    pub iterations: usize,
    pub init_std: f64,
    pub min_std: f64,
    pub episodes_per_candidate: usize,
    /// Evaluate every iteration on the same episode seeds.
    pub fixed_eval_seeds: bool,
    pub hidden: usize,
    /// Initial mean of the acceleration output biases.
    pub init_accel_bias: f64,
    /// Worker threads; 0 uses `S2S_THREADS` or all cores.
    pub threads: usize,
}

impl Default for CemConfig {
    fn default() -> Self {
        CemConfig {
            population: 32,
            elite_frac: 0.25,
            iterations: 30,
            init_std: 1.0,
            min_std: 0.05,
            episodes_per_candidate: 8,
            fixed_eval_seeds: true,
            hidden: 8,
            init_accel_bias: 0.0,
            threads: 0,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.elite_frac > 0.0 && self.elite_frac < 1.0) {
            return bad("elite_frac must be in (0, 1)");
        }
        if self.population == 0 || self.iterations == 0 || self.episodes_per_candidate == 0 || self.hidden == 0 {
            return bad("population, iterations, episodes_per_candidate and hidden must be >= 1");
        }
        if !(self.init_std >= 0.0 && self.min_std >= 0.0) {
            return bad("noise levels must be >= 0");
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_frac).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub elite_mean: f64,
    pub population_mean: f64,
    pub best_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    /// Highest-scoring candidate seen.
    pub params: PolicyParams,
    /// Final sampling mean.
    pub mean: PolicyParams,
    pub curve: Vec<CurveRow>,
    pub best_return: f64,
}

impl TrainOutput {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("iteration,elite_mean,population_mean,best_return\n");
        for r in &self.curve {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                r.iteration, r.elite_mean, r.population_mean, r.best_return
            ));
        }
        s
    }
}

/// Thread count from config, then `S2S_THREADS`, then rayon's default.
pub fn thread_count(configured: usize) -> usize {
    if configured > 0 {
        return configured;
    }
    std::env::var("S2S_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

struct Scored {
    params: Vec<f64>,
    score: f64,
}

/// Train a policy for the template's horizon. Fully determined by
/// `(template, cfg, seed)`.
pub fn train_cem(template: &EnvTemplate, cfg: &CemConfig, seed: u64) -> Result<TrainOutput> {
    train_cem_with(template, cfg, seed, &mut |_| {})
}

/// [`train_cem`] calling `on_iteration` after every iteration.
pub fn train_cem_with(
    template: &EnvTemplate,
    cfg: &CemConfig,
    seed: u64,
    on_iteration: &mut dyn FnMut(&CurveRow),
) -> Result<TrainOutput> {
    cfg.validate()?;
    let horizon = template.config().horizon;
    let dim = PolicyParams::param_count(horizon, FEATURE_LEN, cfg.hidden);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg.threads))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;

    let score = |params: &[f64], seeds: &[u64]| -> Result<f64> {
        let p = PolicyParams::from_vec(horizon, FEATURE_LEN, cfg.hidden, params.to_vec())?;
        let s = summaries(&p, template, seeds)?;
        Ok(s.iter().map(|e| e.ret).sum::<f64>() / s.len() as f64)
    };

    let mut mean = vec![0.0; dim];
    let b2 = dim - 2 * horizon;
    for i in 0..horizon {
        mean[b2 + 2 * i + 1] = cfg.init_accel_bias;
    }
    let mut std = vec![cfg.init_std; dim];
    let mut elites: Vec<Scored> = Vec::new();
    let mut best: Option<Scored> = None;
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut g = rng::stream(seed, 41);
    let k = cfg.elite_count();

    for it in 0..cfg.iterations {
        let seed_base = if cfg.fixed_eval_seeds { rng::derive(seed, 0) } else { rng::derive(seed, it as u64 + 1) };
        let seeds: Vec<u64> = (0..cfg.episodes_per_candidate).map(|e| episode_seed(seed_base, e)).collect();

        let fresh: Vec<Vec<f64>> = (0..cfg.population)
            .map(|_| {
                (0..dim)
                    .map(|i| {
                        let z: f64 = StandardNormal.sample(&mut g);
                        mean[i] + std[i] * z
                    })
                    .collect()
            })
            .collect();
        let fresh_scores: Vec<f64> =
            pool.install(|| fresh.par_iter().map(|p| score(p, &seeds)).collect::<Result<Vec<_>>>())?;
        if !cfg.fixed_eval_seeds {
            // Carried elites are re-scored on this iteration's episodes.
            let rescored: Vec<f64> = pool
                .install(|| elites.par_iter().map(|e| score(&e.params, &seeds)).collect::<Result<Vec<_>>>())?;
            for (e, s) in elites.iter_mut().zip(rescored) {
                e.score = s;
            }
        }
        let population_mean = fresh_scores.iter().sum::<f64>() / fresh_scores.len() as f64;

        let mut all: Vec<Scored> = std::mem::take(&mut elites);
        all.extend(fresh.into_iter().zip(fresh_scores).map(|(params, score)| Scored { params, score }));
        // Stable: carried elites win ties.
        all.sort_by(|a, b| b.score.total_cmp(&a.score));
        all.truncate(k);
        elites = all;

        for i in 0..dim {
            let m = elites.iter().map(|e| e.params[i]).sum::<f64>() / elites.len() as f64;
            let v = elites.iter().map(|e| (e.params[i] - m).powi(2)).sum::<f64>() / elites.len() as f64;
            mean[i] = m;
            std[i] = v.sqrt().max(cfg.min_std);
        }
        let top = &elites[0];
        if best.as_ref().is_none_or(|b| top.score > b.score) {
            best = Some(Scored { params: top.params.clone(), score: top.score });
        }
        let row = CurveRow {
            iteration: it,
            elite_mean: elites.iter().map(|e| e.score).sum::<f64>() / elites.len() as f64,
            population_mean,
            best_return: top.score,
        };
        on_iteration(&row);
        curve.push(row);
    }
    let best = best.expect("at least one iteration");
    Ok(TrainOutput {
        params: PolicyParams::from_vec(horizon, FEATURE_LEN, cfg.hidden, best.params)?,
        mean: PolicyParams::from_vec(horizon, FEATURE_LEN, cfg.hidden, mean)?,
        curve,
        best_return: best.score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;
    use crate::world::{Preset, WorldSpec};

    fn tiny() -> CemConfig {
        CemConfig {
            population: 4,
            iterations: 3,
            episodes_per_candidate: 2,
            hidden: 2,
            threads: 1,
            ..Default::default()
        }
    }

    fn short_env() -> EnvTemplate {
        let mut cfg = EnvConfig::default();
        cfg.episode.max_decisions = 6;
        EnvTemplate::new(cfg, &[WorldSpec::empty_flat(Preset::Meadow, 0)]).unwrap()
    }

    #[test]
    fn elite_mean_never_drops_with_fixed_seeds() {
        let out = train_cem(&short_env(), &tiny(), 5).unwrap();
        assert_eq!(out.curve.len(), 3);
        for w in out.curve.windows(2) {
            assert!(w[1].elite_mean >= w[0].elite_mean);
        }
        assert_eq!(out.curve_csv().lines().count(), 4);
    }

    #[test]
    fn reproducible_and_population_one() {
        let t = short_env();
        assert_eq!(train_cem(&t, &tiny(), 9).unwrap(), train_cem(&t, &tiny(), 9).unwrap());
        let cfg = CemConfig { population: 1, ..tiny() };
        let out = train_cem(&t, &cfg, 1).unwrap();
        assert!(out.params.params.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn config_validation() {
        assert!(CemConfig { elite_frac: 1.0, ..Default::default() }.validate().is_err());
        assert!(CemConfig { population: 0, ..Default::default() }.validate().is_err());
        assert_eq!(CemConfig::default().elite_count(), 8);
    }
}
