//! Trajectory metrics and offline evaluation.
//!
//! All four metrics work on egocentric trajectories resampled to
//! [`METRIC_POINTS`] points evenly spaced by arc length.
//!
//! - `gt`: mean absolute heading difference between aligned samples, each
//!   wrapped into `[0, pi]`.
//! - `ate`: RMS distance between aligned samples, no extra alignment.
//! - `gt_goal`: `gt` against the straight segment from the origin to the goal.
//! - `l2`: endpoint distance to the goal divided by the goal distance, so 1.0
//!   means no progress.

mod offline;
mod translate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{wrap_angle, TrajPoint, Trajectory};

pub use offline::{
    build_offline_dataset, collect_drive_log, evaluate_offline, DriveLog, LogModality, LogSample, Observed, OfflineBuild, OfflineConfig,
    OfflineRecord, PolicyPredictor, ReplayOracle, SkipCounts, TrajectoryPredictor,
};
pub use translate::{SubprocessTranslator, Translator};

pub const METRIC_POINTS: usize = 10;

/// Below this a segment is treated as zero length.
const EPS: f64 = 1e-12;

/// `n` points evenly spaced by arc length, endpoints included. Positions are
/// interpolated linearly; each point's yaw is the direction of the segment
/// it lies on (the last segment for the endpoint).
pub fn resample(traj: &Trajectory, n: usize) -> Result<Vec<TrajPoint>> {
    if n < 2 {
        return Err(Error::InvalidTrajectory(format!("resample needs n >= 2, got {n}")));
    }
    let segs: Vec<(TrajPoint, TrajPoint, f64)> = traj
        .points
        .windows(2)
        .filter_map(|w| {
            let len = ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
            (len > EPS).then_some((w[0], w[1], len))
        })
        .collect();
    let total: f64 = segs.iter().map(|s| s.2).sum();
    if segs.is_empty() || !total.is_finite() {
        return Err(Error::InvalidTrajectory("zero-length trajectory".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut start = 0.0;
    for i in 0..n {
        let target = total * i as f64 / (n - 1) as f64;
        while k + 1 < segs.len() && start + segs[k].2 < target {
            start += segs[k].2;
            k += 1;
        }
        let (a, b, len) = segs[k];
        let f = ((target - start) / len).clamp(0.0, 1.0);
        let yaw = (b.y - a.y).atan2(b.x - a.x);
        out.push(TrajPoint::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), yaw));
    }
    Ok(out)
}

fn pair(reference: &Trajectory, traj: &Trajectory) -> Result<(Vec<TrajPoint>, Vec<TrajPoint>)> {
    Ok((resample(reference, METRIC_POINTS)?, resample(traj, METRIC_POINTS)?))
}

pub fn gt(reference: &Trajectory, traj: &Trajectory) -> Result<f64> {
    let (a, b) = pair(reference, traj)?;
    Ok(a.iter().zip(&b).map(|(p, q)| wrap_angle(p.yaw - q.yaw).abs()).sum::<f64>() / a.len() as f64)
}

pub fn ate(reference: &Trajectory, traj: &Trajectory) -> Result<f64> {
    let (a, b) = pair(reference, traj)?;
    let ss: f64 = a.iter().zip(&b).map(|(p, q)| (p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

fn goal_norm(goal: [f64; 2]) -> Result<f64> {
    let n = (goal[0] * goal[0] + goal[1] * goal[1]).sqrt();
    if n > EPS && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::ZeroGoal)
    }
}

pub fn gt_goal(goal: [f64; 2], traj: &Trajectory) -> Result<f64> {
    goal_norm(goal)?;
    let line = Trajectory::ego(vec![TrajPoint::new(0.0, 0.0, 0.0), TrajPoint::new(goal[0], goal[1], 0.0)]);
    gt(&line, traj)
}

pub fn l2(goal: [f64; 2], traj: &Trajectory) -> Result<f64> {
    let n = goal_norm(goal)?;
    let end = traj.last().ok_or_else(|| Error::InvalidTrajectory("empty trajectory".into()))?;
    Ok(((goal[0] - end.x).powi(2) + (goal[1] - end.y).powi(2)).sqrt() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub gt: f64,
    pub ate: f64,
    pub gt_goal: f64,
    pub l2: f64,
}

impl MetricSet {
    pub fn compute(reference: &Trajectory, goal: [f64; 2], traj: &Trajectory) -> Result<Self> {
        Ok(MetricSet {
            gt: gt(reference, traj)?,
            ate: ate(reference, traj)?,
            gt_goal: gt_goal(goal, traj)?,
            l2: l2(goal, traj)?,
        })
    }

    fn map(sets: &[MetricSet], f: impl Fn(&[f64]) -> f64) -> MetricSet {
        let col = |g: fn(&MetricSet) -> f64| f(&sets.iter().map(g).collect::<Vec<_>>());
        MetricSet { gt: col(|m| m.gt), ate: col(|m| m.ate), gt_goal: col(|m| m.gt_goal), l2: col(|m| m.l2) }
    }

    pub fn mean(sets: &[MetricSet]) -> MetricSet {
        Self::map(sets, mean)
    }

    /// Population standard deviation per metric.
    pub fn std(sets: &[MetricSet]) -> MetricSet {
        Self::map(sets, pop_std)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Metrics for one method on one dataset.
///
/// With a single policy seed `std` is taken across records; with several it
/// is taken across the per-seed means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub dataset: String,
    pub records: usize,
    pub mean: MetricSet,
    pub std: MetricSet,
    pub per_seed: Vec<MetricSet>,
    /// `per_record[seed][record]`.
    pub per_record: Vec<Vec<MetricSet>>,
}

impl MetricReport {
    pub fn from_runs(method: &str, dataset: &str, runs: Vec<Vec<MetricSet>>) -> Result<Self> {
        let records = runs.first().map_or(0, Vec::len);
        if records == 0 || runs.iter().any(|r| r.len() != records) {
            return Err(Error::EmptyDataset);
        }
        let per_seed: Vec<MetricSet> = runs.iter().map(|r| MetricSet::mean(r)).collect();
        let std = if runs.len() == 1 { MetricSet::std(&runs[0]) } else { MetricSet::std(&per_seed) };
        Ok(MetricReport {
            method: method.into(),
            dataset: dataset.into(),
            records,
            mean: MetricSet::mean(&per_seed),
            std,
            per_seed,
            per_record: runs,
        })
    }

    pub const CSV_HEADER: &'static str =
        "method,dataset,seeds,records,gt_mean,gt_std,ate_mean,ate_std,gt_goal_mean,gt_goal_std,l2_mean,l2_std";

    pub fn csv_row(&self) -> String {
        let (m, s) = (self.mean, self.std);
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.method,
            self.dataset,
            self.per_seed.len(),
            self.records,
            m.gt,
            s.gt,
            m.ate,
            s.ate,
            m.gt_goal,
            s.gt_goal,
            m.l2,
            s.l2
        )
    }
}

pub fn reports_csv(reports: &[MetricReport]) -> String {
    let mut s = format!("{}\n", MetricReport::CSV_HEADER);
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Plain-text table, one row per report, `mean ± std` cells.
pub fn reports_table(reports: &[MetricReport]) -> String {
    let cell = |m: f64, s: f64| format!("{m:.3} ± {s:.3}");
    let mut rows = vec![[
        "Method".to_string(),
        "Dataset".to_string(),
        "GT ↓".to_string(),
        "ATE ↓".to_string(),
        "GT_G ↓".to_string(),
        "L2 ↓".to_string(),
    ]];
    for r in reports {
        rows.push([
            r.method.clone(),
            r.dataset.clone(),
            cell(r.mean.gt, r.std.gt),
            cell(r.mean.ate, r.std.ate),
            cell(r.mean.gt_goal, r.std.gt_goal),
            cell(r.mean.l2, r.std.l2),
        ]);
    }
    let widths: Vec<usize> = (0..6).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(heading: f64, len: f64, n: usize) -> Trajectory {
        let (s, c) = heading.sin_cos();
        Trajectory::ego(
            (0..n)
                .map(|i| {
                    let d = len * i as f64 / (n - 1) as f64;
                    TrajPoint::new(d * c, d * s, heading)
                })
                .collect(),
        )
    }

    fn pts(p: &[[f64; 2]]) -> Trajectory {
        Trajectory::ego(p.iter().map(|q| TrajPoint::new(q[0], q[1], 0.0)).collect())
    }

    #[test]
    fn resample_cases() {
        let r = resample(&pts(&[[0.0, 0.0], [9.0, 0.0]]), 10).unwrap();
        for (i, p) in r.iter().enumerate() {
            assert!((p.x - i as f64).abs() < 1e-12 && p.y == 0.0);
        }
        let even = line(0.3, 9.0, 10);
        for (p, q) in resample(&even, 10).unwrap().iter().zip(&even.points) {
            assert!((p.x - q.x).abs() < 1e-12 && (p.y - q.y).abs() < 1e-12);
        }
        let l = resample(&pts(&[[0.0, 0.0], [5.0, 0.0], [5.0, 5.0]]), 3).unwrap();
        assert_eq!([l[1].x, l[1].y], [5.0, 0.0]);
        assert_eq!([l[2].x, l[2].y], [5.0, 5.0]);
        assert!(resample(&pts(&[[1.0, 1.0], [1.0, 1.0]]), 10).is_err());
        assert!(resample(&pts(&[[0.0, 0.0], [1.0, 0.0]]), 1).is_err());
    }

    #[test]
    fn repeated_points_are_skipped() {
        let a = pts(&[[0.0, 0.0], [0.0, 0.0], [3.0, 0.0], [3.0, 0.0], [3.0, 3.0]]);
        let b = pts(&[[0.0, 0.0], [3.0, 0.0], [3.0, 3.0]]);
        assert_eq!(resample(&a, 7).unwrap(), resample(&b, 7).unwrap());
    }

    #[test]
    fn metric_examples() {
        let t = line(0.2, 8.0, 6);
        assert_eq!(gt(&t, &t).unwrap(), 0.0);
        assert_eq!(ate(&t, &t).unwrap(), 0.0);
        let ten = 10f64.to_radians();
        assert!((gt(&line(0.0, 5.0, 4), &line(ten, 5.0, 7)).unwrap() - 0.174533).abs() < 1e-6);
        let shifted = Trajectory::ego(t.points.iter().map(|p| TrajPoint::new(p.x, p.y + 1.0, p.yaw)).collect());
        assert!((ate(&t, &shifted).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(gt_goal([6.0, 0.0], &line(0.0, 3.0, 4)).unwrap(), 0.0);
        let f = 15f64.to_radians();
        assert!((gt_goal([10.0, 0.0], &line(f, 4.0, 5)).unwrap() - f).abs() < 1e-12);
        assert_eq!(l2([10.0, 0.0], &pts(&[[0.0, 0.0], [10.0, 0.0]])).unwrap(), 0.0);
        assert_eq!(l2([10.0, 0.0], &pts(&[[1.0, 0.0], [0.0, 0.0]])).unwrap(), 1.0);
        assert_eq!(l2([10.0, 0.0], &pts(&[[0.0, 0.0], [10.0, 5.0]])).unwrap(), 0.5);
        assert!(matches!(l2([0.0, 0.0], &t), Err(Error::ZeroGoal)));
        assert!(matches!(gt_goal([0.0, 0.0], &t), Err(Error::ZeroGoal)));
    }

    #[test]
    fn ate_three_point_case() {
        // Both paths have equal legs, so resampled points sit at fractions
        // of each leg and the RMS can be written down directly.
        let a = pts(&[[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]]);
        let b = pts(&[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]]);
        let expect = {
            let mut ss = 0.0;
            for i in 0..METRIC_POINTS {
                let s = 4.0 * i as f64 / (METRIC_POINTS - 1) as f64;
                let p = [s, 0.0];
                let q = if s <= 2.0 { [s, 0.0] } else { [2.0, s - 2.0] };
                ss += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            }
            (ss / METRIC_POINTS as f64).sqrt()
        };
        assert!((ate(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn report_aggregation() {
        let m = |v: f64| MetricSet { gt: v, ate: 2.0 * v, gt_goal: v, l2: v };
        let one = MetricReport::from_runs("p", "d", vec![vec![m(1.0), m(3.0)]]).unwrap();
        assert_eq!(one.mean.gt, 2.0);
        assert_eq!(one.std.ate, 2.0);
        let dup = MetricReport::from_runs("p", "d", vec![vec![m(1.0), m(3.0), m(1.0), m(3.0)]]).unwrap();
        assert_eq!((dup.mean, dup.std), (one.mean, one.std));
        let seeds = MetricReport::from_runs("p", "d", vec![vec![m(1.0)], vec![m(2.0)]]).unwrap();
        assert_eq!(seeds.std.gt, 0.5);
        assert!(MetricReport::from_runs("p", "d", vec![]).is_err());
        assert!(MetricReport::from_runs("p", "d", vec![vec![m(1.0)], vec![]]).is_err());
        let csv = reports_csv(&[one.clone(), seeds]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("p,d,1,2,2.000000,1.000000,"));
        assert!(reports_table(&[one]).contains("2.000 ± 1.000"));
    }

    fn arb_traj() -> impl Strategy<Value = Trajectory> {
        prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 2..12)
            .prop_filter("non-degenerate", |p| p.windows(2).any(|w| (w[0].0 - w[1].0).abs() + (w[0].1 - w[1].1).abs() > 1e-3))
            .prop_map(|p| Trajectory::ego(p.into_iter().map(|(x, y)| TrajPoint::new(x, y, 0.0)).collect()))
    }

    fn rotate(t: &Trajectory, a: f64) -> Trajectory {
        let (s, c) = a.sin_cos();
        Trajectory::ego(t.points.iter().map(|p| TrajPoint::new(c * p.x - s * p.y, s * p.x + c * p.y, p.yaw + a)).collect())
    }

    proptest! {
        #[test]
        fn metric_bounds_and_symmetry(a in arb_traj(), b in arb_traj()) {
            let g = gt(&a, &b).unwrap();
            prop_assert!((0.0..=std::f64::consts::PI).contains(&g));
            prop_assert!((g - gt(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ate(&a, &b).unwrap() >= 0.0);
            prop_assert_eq!(gt(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(ate(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn goal_metrics_rotation_invariant(t in arb_traj(), gx in 1.0f64..20.0, gy in -10.0f64..10.0, r in -3.0f64..3.0) {
            let (s, c) = r.sin_cos();
            let g2 = [c * gx - s * gy, s * gx + c * gy];
            let t2 = rotate(&t, r);
            prop_assert!((l2([gx, gy], &t).unwrap() - l2(g2, &t2).unwrap()).abs() < 1e-9);
            prop_assert!((gt_goal([gx, gy], &t).unwrap() - gt_goal(g2, &t2).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn gt_goal_ignores_speed_profile(h in -1.5f64..1.5, n in 3usize..12, gx in 1.0f64..20.0) {
            let uniform = line(h, 6.0, n);
            let (s, c) = h.sin_cos();
            let accel = Trajectory::ego((0..n).map(|i| {
                let d = 6.0 * ((i * i) as f64) / (((n - 1) * (n - 1)) as f64);
                TrajPoint::new(d * c, d * s, h)
            }).collect());
            prop_assert!((gt_goal([gx, 2.0], &uniform).unwrap() - gt_goal([gx, 2.0], &accel).unwrap()).abs() < 1e-9);
        }
    }
}
