use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::translate::Translator;
use super::MetricSet;
use crate::env::{EnvTemplate, Observation};
use crate::error::{Error, Result};
use crate::learner::Policy;
use crate::render::{self, ClassMap, RandomizationConfig};
use crate::rng;
use crate::vehicle::{egocentric_transform, get_traj, Pose2, RolloutConfig, TrajPoint, Trajectory, PAST_LEN};

/// What the camera recorded.
#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    ClassMap(ClassMap),
    Rgb(RgbImage),
}

impl Observed {
    pub fn modality(&self) -> &'static str {
        match self {
            Observed::ClassMap(_) => "classmap",
            Observed::Rgb(_) => "rgb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogSample {
    pub pose: Pose2,
    pub obs: Option<Observed>,
}

/// Odometry at a fixed period, with observations at some samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveLog {
    pub id: u64,
    /// Seconds between samples.
    pub period: f64,
    pub samples: Vec<LogSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    /// Seconds ahead of the anchor at which the goal is read off.
    pub horizon_s: f64,
    /// Consider every n-th sample as an anchor.
    pub anchor_stride: usize,
    /// Past spacing or future length below this is treated as standing still.
    pub min_motion: f64,
    /// Records whose goal is closer than this are skipped as stationary;
    /// the normalized endpoint error is ill-conditioned for tiny goals.
    pub min_goal_distance: f64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig { horizon_s: 3.0, anchor_stride: 1, min_motion: 1e-3, min_goal_distance: 1.0 }
    }
}

/// One evaluation example: observation, goal, past and the path actually
/// driven, all egocentric to the anchor pose.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRecord {
    pub id: String,
    pub obs: Observed,
    pub s_g: [f64; 2],
    pub past: Trajectory,
    pub reference: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SkipCounts {
    pub history: usize,
    pub future: usize,
    pub stationary: usize,
    pub missing_obs: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.history + self.future + self.stationary + self.missing_obs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineBuild {
    pub records: Vec<OfflineRecord>,
    pub skipped: SkipCounts,
}

fn pose_point(p: &Pose2) -> TrajPoint {
    TrajPoint::new(p.x, p.y, p.yaw)
}

pub fn build_offline_dataset(logs: &[DriveLog], cfg: &OfflineConfig) -> Result<OfflineBuild> {
    if cfg.anchor_stride == 0 {
        return Err(Error::InvalidConfig("anchor_stride must be >= 1".into()));
    }
    let mut records = Vec::new();
    let mut skipped = SkipCounts::default();
    for log in logs {
        let h = (cfg.horizon_s / log.period).round();
        if !(h >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon {} s is shorter than the log period {} s",
                cfg.horizon_s, log.period
            )));
        }
        let h = h as usize;
        let n = log.samples.len();
        for k in (0..n).step_by(cfg.anchor_stride) {
            if k + 1 < PAST_LEN {
                skipped.history += 1;
                continue;
            }
            if k + h >= n {
                skipped.future += 1;
                continue;
            }
            let Some(obs) = log.samples[k].obs.clone() else {
                skipped.missing_obs += 1;
                continue;
            };
            let anchor = log.samples[k].pose;
            let pts = |r: std::ops::RangeInclusive<usize>| -> Vec<TrajPoint> {
                log.samples[r].iter().map(|s| pose_point(&s.pose)).collect()
            };
            let past = egocentric_transform(&pts(k + 1 - PAST_LEN..=k), &anchor);
            let reference = egocentric_transform(&pts(k..=k + h), &anchor);
            let end = reference.last().expect("h >= 1").xy();
            if past.last_spacing()? < cfg.min_motion
                || reference.arc_length() < cfg.min_motion
                || end[0].hypot(end[1]) < cfg.min_goal_distance
            {
                skipped.stationary += 1;
                continue;
            }
            records.push(OfflineRecord { id: format!("{}_{k:05}", log.id), obs, s_g: end, past, reference });
        }
    }
    Ok(OfflineBuild { records, skipped })
}

/// Which observation a drive log stores.
#[derive(Debug, Clone, PartialEq)]
pub enum LogModality {
    ClassMap,
    /// Randomized RGB; every sample gets its own appearance seed.
    Rgb(RandomizationConfig),
}

/// Drive one episode of `template` with `policy` and log odometry at the
/// point period. Observations are rendered at every `obs_stride`-th sample.
pub fn collect_drive_log(
    template: &EnvTemplate,
    policy: &dyn Policy,
    seed: u64,
    id: u64,
    modality: &LogModality,
    obs_stride: usize,
) -> Result<DriveLog> {
    let cfg = template.config().clone();
    let substeps = cfg.episode.substeps;
    let mut env = template.instance();
    let mut obs = env.reset(seed)?;
    let world = env.world()?.clone();
    let mut points: Vec<TrajPoint> = env.odometry()?;
    let mut prng = rng::stream(seed, 21);
    loop {
        let before = env.ticks()? / substeps;
        let out = env.step(&policy.act(&obs, &mut prng)?)?;
        let fresh = env.ticks()? / substeps - before;
        let odo = env.odometry()?;
        points.extend_from_slice(&odo[odo.len() - fresh.min(odo.len())..]);
        if out.done {
            break;
        }
        obs = out.obs;
    }
    let stride = obs_stride.max(1);
    let samples = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pose = Pose2::new(p.x, p.y, p.yaw);
            let obs = (i % stride == 0).then(|| match modality {
                LogModality::ClassMap => Observed::ClassMap(render::render_geometry(&world, &pose, &cfg.camera).class_map),
                LogModality::Rgb(rand) => {
                    Observed::Rgb(render::render(&world, &pose, &cfg.camera, rand, rng::derive(seed, i as u64)).rgb)
                }
            });
            LogSample { pose, obs }
        })
        .collect();
    Ok(DriveLog { id, period: cfg.episode.point_period(), samples })
}

/// Proposes an egocentric trajectory for an offline record.
pub trait TrajectoryPredictor: Sync {
    fn predict(&self, record: &OfflineRecord, class_map: &ClassMap, seed: u64) -> Result<Trajectory>;
}

/// Runs a policy on the record's inputs and rolls its actions out into
/// `horizon + 1` points.
pub struct PolicyPredictor<'a> {
    pub policy: &'a dyn Policy,
    pub rollout: RolloutConfig,
}

impl TrajectoryPredictor for PolicyPredictor<'_> {
    fn predict(&self, record: &OfflineRecord, class_map: &ClassMap, seed: u64) -> Result<Trajectory> {
        let obs = Observation { class_map: class_map.clone(), past: record.past.clone(), s_a: [0.0, 0.0], s_g: record.s_g };
        let actions = self.policy.act(&obs, &mut rng::stream(seed, 51))?;
        get_traj(self.policy.horizon() + 1, &record.past, &actions.0, &self.rollout)
    }
}

/// Returns the driven path itself.
pub struct ReplayOracle;

impl TrajectoryPredictor for ReplayOracle {
    fn predict(&self, record: &OfflineRecord, _class_map: &ClassMap, _seed: u64) -> Result<Trajectory> {
        Ok(record.reference.clone())
    }
}

/// Per-record metrics for one predictor seed. RGB records go through
/// `translator`; without one they are a modality error.
pub fn evaluate_offline(
    predictor: &dyn TrajectoryPredictor,
    translator: Option<&dyn Translator>,
    records: &[OfflineRecord],
    seed: u64,
) -> Result<Vec<MetricSet>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rgb: Vec<(usize, &RgbImage)> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match &r.obs {
            Observed::Rgb(img) => Some((i, img)),
            Observed::ClassMap(_) => None,
        })
        .collect();
    let mut translated: Vec<Option<ClassMap>> = vec![None; records.len()];
    if !rgb.is_empty() {
        let t = translator.ok_or_else(|| {
            Error::Modality(format!(
                "{} record(s) hold RGB observations; a translation model is required to evaluate them",
                rgb.len()
            ))
        })?;
        let maps = t.translate(&rgb.iter().map(|(_, img)| *img).collect::<Vec<_>>())?;
        for ((i, _), m) in rgb.iter().zip(maps) {
            translated[*i] = Some(m);
        }
    }
    records
        .par_iter()
        .zip(translated.par_iter())
        .enumerate()
        .map(|(i, (r, t))| {
            let cm = match (&r.obs, t) {
                (Observed::ClassMap(cm), _) => cm,
                (Observed::Rgb(_), Some(cm)) => cm,
                (Observed::Rgb(_), None) => unreachable!("translated above"),
            };
            let traj = predictor.predict(r, cm, rng::derive(seed, i as u64))?;
            MetricSet::compute(&r.reference, r.s_g, &traj)
        })
        .collect()
}
