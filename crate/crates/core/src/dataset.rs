//! On-disk formats.
//!
//! Paired renders, one triple per id plus a metadata line:
//!
//! - `<id>_rgb.png`: 8-bit RGB.
//! - `<id>_seg.png`: 8-bit grayscale, pixel value = class index 0..=5.
//! - `<id>_depth.f32`: little-endian f32, row-major, meters.
//! - `meta.jsonl`: one [`PairMeta`] per line.
//!
//! Offline records: `records.jsonl` with one [`RecordLine`] per line and the
//! observation in `<id>_seg.png` or `<id>_rgb.png` beside it.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::env::EnvTemplate;
use crate::error::{Error, Result};
use crate::learner::{Policy, RandomPolicy};
use crate::rng;
use crate::metrics::{Observed, OfflineRecord};
use crate::render::{ClassMap, DepthMap, RandomizationConfig, RenderOutput};
use crate::vehicle::{TrajPoint, Trajectory};

pub const META_FILE: &str = "meta.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub id: String,
    pub preset: String,
    pub world_seed: u64,
    /// `[x, y, yaw]`, world frame.
    pub pose: [f64; 3],
    pub randomization_seed: u64,
}

pub struct PairPaths {
    pub rgb: PathBuf,
    pub seg: PathBuf,
    pub depth: PathBuf,
}

pub fn pair_paths(dir: &Path, id: &str) -> PairPaths {
    PairPaths {
        rgb: dir.join(format!("{id}_rgb.png")),
        seg: dir.join(format!("{id}_seg.png")),
        depth: dir.join(format!("{id}_depth.f32")),
    }
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    let bytes: Vec<u8> = depth.data.iter().flat_map(|d| d.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_depth(path: &Path, width: usize, height: usize) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != width * height * 4 {
        return Err(Error::Format(format!(
            "{}: {} bytes, expected {} for {width}x{height}",
            path.display(),
            bytes.len(),
            width * height * 4
        )));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok(DepthMap { width, height, data })
}

pub fn write_pair(dir: &Path, id: &str, out: &RenderOutput) -> Result<()> {
    let p = pair_paths(dir, id);
    out.rgb.save(&p.rgb)?;
    out.class_map.to_gray_image().save(&p.seg)?;
    write_depth(&p.depth, &out.depth)
}

fn read_rgb(path: &Path) -> Result<RgbImage> {
    match image::open(path)? {
        DynamicImage::ImageRgb8(img) => Ok(img),
        other => Err(Error::Format(format!("{}: expected 8-bit RGB, got {:?}", path.display(), other.color()))),
    }
}

/// Load an 8-bit grayscale class-index PNG.
pub fn read_class_map(path: &Path) -> Result<ClassMap> {
    match image::open(path)? {
        DynamicImage::ImageLuma8(g) => ClassMap::from_gray_image(&g),
        other => Err(Error::Format(format!(
            "{}: class map must be 8-bit grayscale, got {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Load one triple, checking that all three agree in size.
pub fn read_pair(dir: &Path, id: &str) -> Result<(RgbImage, ClassMap, DepthMap)> {
    let p = pair_paths(dir, id);
    let rgb = read_rgb(&p.rgb)?;
    let seg = read_class_map(&p.seg)?;
    if (seg.width, seg.height) != (rgb.width() as usize, rgb.height() as usize) {
        return Err(Error::Format(format!("pair {id}: rgb and seg sizes differ")));
    }
    let depth = read_depth(&p.depth, seg.width, seg.height)?;
    Ok((rgb, seg, depth))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T], append: bool) -> Result<()> {
    let f = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// Drive a random policy through `template`'s scenarios and write `n` pairs
/// into `dir`, one every `every` decisions, each with its own randomization
/// seed. Rendering uses the template's camera.
pub fn collect_pairs(
    template: &EnvTemplate,
    n: usize,
    rand: &RandomizationConfig,
    every: usize,
    seed: u64,
    dir: &Path,
) -> Result<Vec<PairMeta>> {
    if n == 0 || every == 0 {
        return Err(Error::InvalidConfig("pair count and interval must be >= 1".into()));
    }
    rand.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let policy = RandomPolicy { horizon: template.config().horizon };
    let mut env = template.instance();
    let mut metas = Vec::with_capacity(n);
    let rand_base = rng::derive(seed, u64::MAX);
    for episode in 0u64.. {
        let ep_seed = rng::derive(seed, episode);
        let mut g = rng::stream(ep_seed, 21);
        let mut obs = env.reset(ep_seed)?;
        while !env.is_done() && metas.len() < n {
            if env.decisions() % every == 0 {
                let i = metas.len() as u64;
                let id = format!("{i:06}");
                let randomization_seed = rng::derive(rand_base, i);
                write_pair(dir, &id, &env.render_rgb(rand, randomization_seed)?)?;
                let pose = env.state()?.pose();
                let spec = env.world()?.spec();
                metas.push(PairMeta {
                    id,
                    preset: spec.preset.name().into(),
                    world_seed: spec.seed,
                    pose: [pose.x, pose.y, pose.yaw],
                    randomization_seed,
                });
            }
            let acts = policy.act(&obs, &mut g)?;
            env.step(&acts)?;
            if !env.is_done() {
                obs = env.observe()?;
            }
        }
        if metas.len() == n {
            break;
        }
    }
    write_jsonl(&dir.join(META_FILE), &metas, false)?;
    Ok(metas)
}

pub fn append_meta(dir: &Path, metas: &[PairMeta]) -> Result<()> {
    write_jsonl(&dir.join(META_FILE), metas, true)
}

pub fn read_meta(dir: &Path) -> Result<Vec<PairMeta>> {
    read_jsonl(&dir.join(META_FILE))
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub id: String,
    /// `classmap` or `rgb`.
    pub modality: String,
    /// Observation file name, relative to the dataset directory.
    pub obs: String,
    pub s_g: [f64; 2],
    /// `[x, y, yaw]` per point, egocentric.
    pub past: Vec<[f64; 3]>,
    pub reference: Vec<[f64; 3]>,
}

fn ego(points: &[[f64; 3]]) -> Trajectory {
    Trajectory::ego(points.iter().map(|p| TrajPoint::new(p[0], p[1], p[2])).collect())
}

pub fn write_offline_dataset(dir: &Path, records: &[OfflineRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut lines = Vec::with_capacity(records.len());
    for r in records {
        let obs = match &r.obs {
            Observed::ClassMap(cm) => {
                let name = format!("{}_seg.png", r.id);
                cm.to_gray_image().save(dir.join(&name))?;
                name
            }
            Observed::Rgb(img) => {
                let name = format!("{}_rgb.png", r.id);
                img.save(dir.join(&name))?;
                name
            }
        };
        lines.push(RecordLine {
            id: r.id.clone(),
            modality: r.obs.modality().into(),
            obs,
            s_g: r.s_g,
            past: r.past.flat_xyyaw(),
            reference: r.reference.flat_xyyaw(),
        });
    }
    write_jsonl(&dir.join(RECORDS_FILE), &lines, false)
}

pub fn read_offline_dataset(dir: &Path) -> Result<Vec<OfflineRecord>> {
    let lines: Vec<RecordLine> = read_jsonl(&dir.join(RECORDS_FILE))?;
    lines
        .into_iter()
        .map(|l| {
            let path = dir.join(&l.obs);
            let obs = match l.modality.as_str() {
                "classmap" => Observed::ClassMap(read_class_map(&path)?),
                "rgb" => Observed::Rgb(read_rgb(&path)?),
                m => return Err(Error::Format(format!("record {}: unknown modality {m:?}", l.id))),
            };
            Ok(OfflineRecord { id: l.id, obs, s_g: l.s_g, past: ego(&l.past), reference: ego(&l.reference) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;
    use crate::render::{render, CameraModel};
    use crate::vehicle::Pose2;
    use crate::world::{ClassId, Preset, World, WorldSpec};

    #[test]
    fn pair_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = World::flat_with_obstacles(WorldSpec::empty_flat(Preset::Meadow, 0), vec![]).unwrap();
        let out = render(&w, &Pose2::new(50.0, 50.0, 0.3), &CameraModel::with_resolution(16), &RandomizationConfig::default(), 5);
        write_pair(dir.path(), "000001", &out).unwrap();
        let (rgb, seg, depth) = read_pair(dir.path(), "000001").unwrap();
        assert_eq!((rgb, seg, depth), (out.rgb, out.class_map, out.depth));
        let m = PairMeta { id: "000001".into(), preset: "meadow".into(), world_seed: 0, pose: [50.0, 50.0, 0.3], randomization_seed: 5 };
        append_meta(dir.path(), std::slice::from_ref(&m)).unwrap();
        append_meta(dir.path(), std::slice::from_ref(&m)).unwrap();
        assert_eq!(read_meta(dir.path()).unwrap(), vec![m.clone(), m]);
    }

    #[test]
    fn malformed_pairs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = pair_paths(dir.path(), "a");
        RgbImage::new(4, 4).save(&p.rgb).unwrap();
        image::GrayImage::from_pixel(4, 4, image::Luma([6])).save(&p.seg).unwrap();
        assert!(matches!(read_pair(dir.path(), "a"), Err(Error::UnknownClass(6))));
        image::GrayImage::from_pixel(4, 4, image::Luma([1])).save(&p.seg).unwrap();
        fs::write(&p.depth, [0u8; 12]).unwrap();
        assert!(matches!(read_pair(dir.path(), "a"), Err(Error::Format(_))));
        assert!(read_pair(dir.path(), "missing").is_err());
    }

    #[test]
    fn offline_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = |k: f64| Trajectory::ego((0..4).map(|i| TrajPoint::new(k * i as f64, 0.1 * i as f64, 0.05)).collect());
        let recs = vec![
            OfflineRecord {
                id: "0_00010".into(),
                obs: Observed::ClassMap(ClassMap::filled(8, 8, ClassId::Logs)),
                s_g: [3.0, 0.3],
                past: t(-1.0),
                reference: t(1.0),
            },
            OfflineRecord {
                id: "0_00011".into(),
                obs: Observed::Rgb(RgbImage::from_pixel(8, 8, image::Rgb([1, 2, 3]))),
                s_g: [3.0, 0.3],
                past: t(-1.0),
                reference: t(1.0),
            },
        ];
        write_offline_dataset(dir.path(), &recs).unwrap();
        assert_eq!(read_offline_dataset(dir.path()).unwrap(), recs);
    }

    #[test]
    fn collected_pairs_are_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = EnvConfig::default();
        cfg.camera = CameraModel::with_resolution(16);
        let t = EnvTemplate::new(cfg, &[WorldSpec::new(Preset::Landscape, 2)]).unwrap();
        let metas = collect_pairs(&t, 7, &RandomizationConfig::default(), 3, 4, dir.path()).unwrap();
        assert_eq!(read_meta(dir.path()).unwrap(), metas);
        assert_eq!(metas.len(), 7);
        for m in &metas {
            let (_, seg, depth) = read_pair(dir.path(), &m.id).unwrap();
            assert_eq!(seg.width, 16);
            assert!(depth.data.iter().all(|&d| d > 0.0 && d <= 100.0));
        }
        let again = tempfile::tempdir().unwrap();
        collect_pairs(&t, 7, &RandomizationConfig::default(), 3, 4, again.path()).unwrap();
        for m in &metas {
            let a = pair_paths(dir.path(), &m.id);
            let b = pair_paths(again.path(), &m.id);
            assert_eq!(fs::read(a.rgb).unwrap(), fs::read(b.rgb).unwrap());
        }
        assert!(collect_pairs(&t, 0, &RandomizationConfig::default(), 3, 4, dir.path()).is_err());
    }
}
