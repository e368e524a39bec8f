//! `S2SW` world files and top-down previews.

use std::path::Path;

use image::RgbImage;

use super::{ClassId, ObstacleDensities, Obstacle, Preset, RoadSpec, World, WorldSpec};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const WORLD_MAGIC: &[u8; 4] = b"S2SW";
pub const WORLD_VERSION: u16 = 1;

impl World {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(WORLD_MAGIC, WORLD_VERSION);
        let s = &self.spec;
        w.u64(s.seed);
        w.u8(s.preset.code());
        w.f64(s.extent);
        w.f64(s.grid_resolution);
        w.f64(s.densities.trees);
        w.f64(s.densities.rocks);
        w.f64(s.densities.logs);
        match s.road {
            Some(r) => {
                w.bool(true);
                w.f64(r.width);
                w.u32(r.waypoints);
            }
            None => w.bool(false),
        }
        match s.terrain_amplitude {
            Some(a) => {
                w.bool(true);
                w.f64(a);
            }
            None => w.bool(false),
        }
        w.u32(self.n as u32);
        for &h in &self.heights {
            w.f64(h);
        }
        for &r in &self.road_mask {
            w.bool(r);
        }
        w.len_prefix(self.obstacles.len());
        for o in &self.obstacles {
            w.u8(o.class.index());
            w.f64(o.center[0]);
            w.f64(o.center[1]);
            w.f64(o.radius);
            w.f64(o.height);
        }
        w.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<World> {
        let (mut r, version) = Reader::with_header(buf, WORLD_MAGIC)?;
        if version != WORLD_VERSION {
            return Err(Error::Format(format!("unsupported world version {version}")));
        }
        let seed = r.u64()?;
        let preset = Preset::from_code(r.u8()?)?;
        let extent = r.f64()?;
        let grid_resolution = r.f64()?;
        let densities = ObstacleDensities {
            trees: r.f64()?,
            rocks: r.f64()?,
            logs: r.f64()?,
        };
        let road = if r.bool()? {
            Some(RoadSpec {
                width: r.f64()?,
                waypoints: r.u32()?,
            })
        } else {
            None
        };
        let terrain_amplitude = if r.bool()? { Some(r.f64()?) } else { None };
        let spec = WorldSpec {
            seed,
            preset,
            extent,
            grid_resolution,
            densities,
            road,
            terrain_amplitude,
        };
        spec.validate()?;
        let n = r.u32()? as usize;
        if n != spec.grid_size() {
            return Err(Error::Format(format!(
                "grid size {n} does not match spec ({})",
                spec.grid_size()
            )));
        }
        let heights = (0..n * n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let road_mask = (0..n * n).map(|_| r.bool()).collect::<Result<Vec<_>>>()?;
        let count = r.len_prefix()?;
        let mut obstacles = Vec::with_capacity(count);
        for _ in 0..count {
            obstacles.push(Obstacle {
                class: ClassId::from_index(r.u8()?)?,
                center: [r.f64()?, r.f64()?],
                radius: r.f64()?,
                height: r.f64()?,
            });
        }
        r.finish()?;
        World::from_parts(spec, heights, obstacles, road_mask)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<World> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        World::from_bytes(&buf)
    }

    /// Top-down class image, one pixel per heightmap node, north up.
    pub fn top_down_image(&self) -> RgbImage {
        let n = self.n as u32;
        let res = self.spec.grid_resolution;
        RgbImage::from_fn(n, n, |px, py| {
            let x = px as f64 * res;
            let y = (n - 1 - py) as f64 * res;
            image::Rgb(self.top_down_class(x, y).color())
        })
    }
}
