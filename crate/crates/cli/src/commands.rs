use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{GrayImage, Luma, Rgb, RgbImage};
use offroad_core::dataset::{self, read_offline_dataset, write_offline_dataset};
use offroad_core::env::{EnvTemplate, EpisodeLogRecord};
use offroad_core::learner::{
    episode_seed, run_episode_logged, train_cem_with, EvalReport, RandomPolicy, ScriptedGoalPolicy,
};
use offroad_core::metrics::{
    build_offline_dataset, collect_drive_log, evaluate_offline, reports_csv, reports_table, LogModality,
    OfflineConfig, PolicyPredictor, ReplayOracle, SubprocessTranslator, Translator, TrajectoryPredictor,
};
use offroad_core::render::{colorize_segmentation, render};
use offroad_core::world::generate_world;
use offroad_core::{rng, CameraModel, MetricReport, OfflineRecord, Policy, PolicyParams, Pose2, World};

use crate::config::{usage, RunConfig};

pub const WORLD_FILE: &str = "world.s2sw";
pub const POLICY_FILE: &str = "policy.bin";

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn save_png<P: image::PixelWithColorType, C: std::ops::Deref<Target = [P::Subpixel]>>(
    img: &image::ImageBuffer<P, C>,
    path: &Path,
) -> Result<()>
where
    [P::Subpixel]: image::EncodableLayout,
{
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    cfg.write_resolved(out)
}

/// The first configured preset's world, seeded by `world.seed`.
fn single_world(cfg: &RunConfig) -> Result<World> {
    let preset = cfg.presets()?[0];
    let spec = cfg.world_spec(preset, cfg.get("world.seed")?)?;
    Ok(generate_world(&spec)?)
}

pub fn gen_world(cfg: &RunConfig, out: &Path) -> Result<()> {
    let world = single_world(cfg)?;
    prepare(cfg, out)?;
    world.save(out.join(WORLD_FILE))?;
    save_png(&world.top_down_image(), &out.join("preview.png"))?;
    println!(
        "{} world, {} obstacles, heights {:.2}..{:.2} m -> {}",
        world.spec().preset.name(),
        world.obstacles().len(),
        world.min_height(),
        world.max_height(),
        out.display()
    );
    Ok(())
}

/// `pairs.count` pairs per preset, each preset in its own subdirectory.
pub fn collect_pairs(cfg: &RunConfig, out: &Path) -> Result<()> {
    let n: usize = cfg.get("pairs.count")?;
    if n == 0 {
        return Err(usage("pairs.count must be >= 1"));
    }
    let every: usize = cfg.get("pairs.every")?;
    let rand = cfg.randomization()?;
    let mut env_cfg = cfg.env_config()?;
    env_cfg.camera = CameraModel::with_resolution(cfg.get("pairs.resolution")?);
    env_cfg.validate().map_err(|e| usage(e.to_string()))?;
    prepare(cfg, out)?;
    let seed = cfg.seed()?;
    let base: u64 = cfg.get("world.seed")?;
    let per: u64 = cfg.get("worlds_per_preset")?;
    for (k, preset) in cfg.presets()?.into_iter().enumerate() {
        let specs: Vec<_> = (0..per).map(|i| cfg.world_spec(preset, base + i)).collect::<Result<_>>()?;
        let template = EnvTemplate::new(env_cfg.clone(), &specs)?;
        let dir = out.join(preset.name());
        let metas = dataset::collect_pairs(&template, n, &rand, every, rng::derive(seed, k as u64), &dir)?;
        println!("{}: {} pairs -> {}", preset.name(), metas.len(), dir.display());
    }
    Ok(())
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let template = cfg.template()?;
    let cem = cfg.cem()?;
    let seed = cfg.seed()?;
    prepare(cfg, out)?;
    let t0 = std::time::Instant::now();
    let result = train_cem_with(&template, &cem, seed, &mut |row| {
        eprintln!(
            "iter {:>3}  elite {:>9.2}  population {:>9.2}  best {:>9.2}  {:>6.1}s",
            row.iteration,
            row.elite_mean,
            row.population_mean,
            row.best_return,
            t0.elapsed().as_secs_f64()
        );
    })?;
    result.params.save(out.join(POLICY_FILE))?;
    result.mean.save(out.join("policy_mean.bin"))?;
    write(&out.join("curve.csv"), result.curve_csv())?;
    println!("best return {:.2} -> {}", result.best_return, out.join(POLICY_FILE).display());
    Ok(())
}

pub enum Predictors {
    Checkpoints(Vec<PathBuf>),
    Baseline(String),
}

fn load_policy(path: &Path) -> Result<PolicyParams> {
    PolicyParams::load(path).with_context(|| format!("loading policy {}", path.display()))
}

pub fn eval_offline(
    cfg: &RunConfig,
    out: &Path,
    dataset_dir: &Path,
    source: Predictors,
    translator: Option<(PathBuf, Vec<String>)>,
    method: Option<String>,
) -> Result<()> {
    let records = read_offline_dataset(dataset_dir)
        .with_context(|| format!("reading offline dataset {}", dataset_dir.display()))?;
    let rollout = cfg.env_config()?.rollout;
    let seeds: usize = cfg.get("eval.seeds")?;
    prepare(cfg, out)?;
    let translator: Option<Box<dyn Translator>> =
        translator.map(|(p, args)| Box::new(SubprocessTranslator::new(p, args, out.join("translate"))) as _);
    let tr = translator.as_deref();
    let dataset_name = dataset_dir.file_name().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());

    let run = |pred: &dyn TrajectoryPredictor, seed: u64| -> Result<_> {
        evaluate_offline(pred, tr, &records, seed).context("offline evaluation")
    };
    let (label, runs) = match source {
        Predictors::Checkpoints(paths) => {
            let mut runs = Vec::new();
            for (i, p) in paths.iter().enumerate() {
                let policy = load_policy(p)?;
                runs.push(run(&PolicyPredictor { policy: &policy, rollout }, i as u64 + 1)?);
            }
            ("policy".to_string(), runs)
        }
        Predictors::Baseline(name) => {
            let horizon: usize = cfg.get("env.horizon")?;
            let random = RandomPolicy { horizon };
            let scripted = ScriptedGoalPolicy::new(horizon);
            let policy: Option<&dyn Policy> = match name.as_str() {
                "random" => Some(&random),
                "scripted" => Some(&scripted),
                "oracle" => None,
                other => return Err(usage(format!("unknown baseline '{other}' (random, scripted, oracle)"))),
            };
            if seeds == 0 {
                return Err(usage("eval.seeds must be >= 1"));
            }
            let mut runs = Vec::new();
            for s in 1..=seeds as u64 {
                runs.push(match policy {
                    Some(p) => run(&PolicyPredictor { policy: p, rollout }, s)?,
                    None => run(&ReplayOracle, s)?,
                });
            }
            (name, runs)
        }
    };
    let report = MetricReport::from_runs(&method.unwrap_or(label), &dataset_name, runs)?;
    write(&out.join("report.csv"), reports_csv(std::slice::from_ref(&report)))?;
    let mut per = String::from("seed,record,gt,ate,gt_goal,l2\n");
    for (s, run) in report.per_record.iter().enumerate() {
        for (r, m) in run.iter().enumerate() {
            per.push_str(&format!("{},{},{:.6},{:.6},{:.6},{:.6}\n", s + 1, records[r].id, m.gt, m.ate, m.gt_goal, m.l2));
        }
    }
    write(&out.join("per_record.csv"), per)?;
    print!("{}", reports_table(std::slice::from_ref(&report)));
    Ok(())
}

pub enum Actor {
    Checkpoint(PathBuf),
    Baseline(String),
}

fn to_pixel(world: &World, p: [f64; 2]) -> Option<(u32, u32)> {
    let n = world.grid_size() as f64;
    let res = world.resolution();
    let px = (p[0] / res).round();
    let py = n - 1.0 - (p[1] / res).round();
    (px >= 0.0 && py >= 0.0 && px < n && py < n).then_some((px as u32, py as u32))
}

fn mark(img: &mut RgbImage, world: &World, p: [f64; 2], color: [u8; 3], r: i64) {
    if let Some((x, y)) = to_pixel(world, p) {
        for dy in -r..=r {
            for dx in -r..=r {
                let (u, v) = (x as i64 + dx, y as i64 + dy);
                if u >= 0 && v >= 0 && (u as u32) < img.width() && (v as u32) < img.height() {
                    img.put_pixel(u as u32, v as u32, Rgb(color));
                }
            }
        }
    }
}

fn write_previews(dir: &Path, world: &World, start: [f64; 2], episode: usize, log: &[EpisodeLogRecord]) -> Result<()> {
    let base = world.top_down_image();
    for t in 0..log.len() {
        let mut img = base.clone();
        mark(&mut img, world, log[t].goal, [255, 0, 255], 2);
        mark(&mut img, world, start, [255, 255, 0], 1);
        for r in &log[..=t] {
            mark(&mut img, world, [r.state.x, r.state.y], [255, 255, 0], 1);
        }
        save_png(&img, &dir.join(format!("e{episode:04}_t{t:03}.png")))?;
    }
    Ok(())
}

pub fn eval_online(cfg: &RunConfig, out: &Path, source: Actor, preview: bool) -> Result<()> {
    let mut env_cfg = cfg.env_config()?;
    let checkpoint;
    let random;
    let scripted;
    let policy: &dyn Policy = match source {
        Actor::Checkpoint(p) => {
            checkpoint = load_policy(&p)?;
            if checkpoint.horizon != env_cfg.horizon {
                env_cfg = env_cfg.clone();
                env_cfg.horizon = checkpoint.horizon;
                env_cfg.episode = env_cfg.episode.clone().for_horizon(checkpoint.horizon);
            }
            &checkpoint
        }
        Actor::Baseline(name) => match name.as_str() {
            "random" => {
                random = RandomPolicy { horizon: env_cfg.horizon };
                &random
            }
            "scripted" => {
                scripted = ScriptedGoalPolicy::new(env_cfg.horizon);
                &scripted
            }
            other => return Err(usage(format!("unknown baseline '{other}' (random, scripted)"))),
        },
    };
    let mut resolved = cfg.clone();
    resolved.set("env.horizon", &env_cfg.horizon.to_string())?;
    let template = resolved.template()?;
    let episodes: usize = cfg.get("eval.episodes")?;
    if episodes == 0 {
        return Err(usage("eval.episodes must be >= 1"));
    }
    let seed = cfg.seed()?;
    prepare(&resolved, out)?;
    let preview_dir = out.join("preview");
    if preview {
        fs::create_dir_all(&preview_dir).with_context(|| format!("creating {}", preview_dir.display()))?;
    }
    let mut env = template.instance();
    let mut summaries = Vec::with_capacity(episodes);
    let log_path = out.join("episodes.jsonl");
    let mut log = std::io::BufWriter::new(
        fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
    );
    for k in 0..episodes {
        let (s, records) = run_episode_logged(policy, &mut env, episode_seed(seed, k), k as u64)?;
        for r in &records {
            serde_json::to_writer(&mut log, r)?;
            log.write_all(b"\n")?;
        }
        if preview {
            let start = env.odometry()?.first().map(|p| [p.x, p.y]).unwrap_or_default();
            write_previews(&preview_dir, env.world()?, start, k, &records)?;
        }
        summaries.push(s);
    }
    log.flush()?;
    let report = EvalReport::from_summaries(&summaries);
    write(&out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    println!(
        "{} episodes: success {:.3}, collision {:.3}, mean return {:.2}, decisions to goal {}",
        report.episodes,
        report.success_rate,
        report.collision_rate,
        report.mean_return,
        report.mean_decisions_to_goal.map_or("n/a".into(), |d| format!("{d:.1}"))
    );
    Ok(())
}

pub fn render_preview(cfg: &RunConfig, out: &Path, world_file: Option<&Path>, pose: [Option<f64>; 3]) -> Result<()> {
    let world = match world_file {
        Some(p) => World::load(p).with_context(|| format!("loading world {}", p.display()))?,
        None => single_world(cfg)?,
    };
    let c = world.start_position();
    let pose = Pose2::new(pose[0].unwrap_or(c[0]), pose[1].unwrap_or(c[1]), pose[2].unwrap_or(0.0));
    if !world.in_bounds(pose.x, pose.y) {
        return Err(usage(format!("pose ({}, {}) lies outside the world", pose.x, pose.y)));
    }
    let camera = CameraModel::with_resolution(cfg.get("pairs.resolution")?);
    camera.validate().map_err(|e| usage(e.to_string()))?;
    let rand = cfg.randomization()?;
    prepare(cfg, out)?;
    let r = render(&world, &pose, &camera, &rand, cfg.seed()?);
    save_png(&r.rgb, &out.join("rgb.png"))?;
    save_png(&colorize_segmentation(&r.class_map), &out.join("seg_color.png"))?;
    save_png(&r.class_map.to_gray_image(), &out.join("seg.png"))?;
    let n = camera.resolution as u32;
    let depth = GrayImage::from_fn(n, n, |x, y| {
        let d = r.depth.data[(y * n + x) as usize] as f64;
        Luma([(255.0 * (1.0 - d / camera.max_range).clamp(0.0, 1.0)) as u8])
    });
    save_png(&depth, &out.join("depth.png"))?;
    println!("rendered {n}x{n} at ({:.1}, {:.1}, {:.2}) -> {}", pose.x, pose.y, pose.yaw, out.display());
    Ok(())
}

pub fn collect_offline(cfg: &RunConfig, out: &Path) -> Result<()> {
    let template = cfg.template()?;
    let logs: usize = cfg.get("offline.logs")?;
    let max_records: usize = cfg.get("offline.max_records")?;
    let modality = match cfg.raw("offline.modality") {
        "classmap" => LogModality::ClassMap,
        "rgb" => LogModality::Rgb(cfg.randomization()?),
        other => return Err(usage(format!("unknown modality '{other}' (classmap, rgb)"))),
    };
    let offline = OfflineConfig {
        horizon_s: cfg.get("offline.horizon")?,
        anchor_stride: cfg.get("offline.stride")?,
        min_goal_distance: cfg.get("offline.min_goal_distance")?,
        ..Default::default()
    };
    if logs == 0 {
        return Err(usage("offline.logs must be >= 1"));
    }
    let seed = cfg.seed()?;
    prepare(cfg, out)?;
    let driver = ScriptedGoalPolicy::new(template.config().horizon);
    let drives = (0..logs)
        .map(|i| collect_drive_log(&template, &driver, rng::derive(seed, i as u64), i as u64, &modality, 1))
        .collect::<offroad_core::Result<Vec<_>>>()?;
    let built = build_offline_dataset(&drives, &offline)?;
    let records: Vec<OfflineRecord> = built.records.into_iter().take(max_records).collect();
    if records.is_empty() {
        bail!("no usable records; skipped {:?}", built.skipped);
    }
    write_offline_dataset(out, &records)?;
    println!("{} records from {logs} logs (skipped {:?}) -> {}", records.len(), built.skipped, out.display());
    Ok(())
}
