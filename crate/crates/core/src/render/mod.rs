//! Vehicle-camera rendering by per-pixel raycasting.
//!
//! Geometry (class map, depth, obstacle mask) depends only on the scene and
//! the camera rays. Color, lighting and texture randomization act only on the
//! RGB image, so any number of differently randomized RGB frames share one
//! pixel-aligned ground truth. Camera jitter moves the rays and therefore
//! changes both images of a pair together.

mod raycast;
mod shade;

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::vehicle::Pose2;
use crate::world::{ClassId, World};

pub use raycast::{CameraFrame, Hit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Mount position in the vehicle frame (x forward, y left, z up), meters.
    pub mount_offset: [f64; 3],
    /// Radians, positive looks up.
    pub mount_pitch: f64,
    /// Horizontal field of view, radians. Images are square.
    pub fov: f64,
    pub resolution: usize,
    pub max_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            mount_offset: [1.0, 0.0, 1.8],
            mount_pitch: -0.2,
            fov: std::f64::consts::FRAC_PI_2,
            resolution: 256,
            max_range: 100.0,
        }
    }
}

impl CameraModel {
    pub fn with_resolution(resolution: usize) -> Self {
        CameraModel {
            resolution,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!("fov must be in (0, pi), got {}", self.fov)));
        }
        if self.resolution < 16 {
            return Err(Error::InvalidConfig(format!(
                "resolution must be >= 16, got {}",
                self.resolution
            )));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidConfig("max_range must be > 0".into()));
        }
        Ok(())
    }
}

/// Domain randomization axes. Jitter values are half-widths of uniform
/// ranges; each axis can be switched off independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationConfig {
    /// Per-class base RGB, indexed by class index.
    pub base_colors: [[u8; 3]; 6],
    /// Hue shift, fraction of the color wheel.
    pub hue_jitter: f64,
    /// Relative brightness jitter.
    pub brightness_jitter: f64,
    /// Light azimuth/elevation jitter, radians.
    pub light_direction_jitter: f64,
    /// Per-channel light tint jitter.
    pub light_color_jitter: f64,
    /// Relative amplitude of per-class procedural speckle.
    pub texture_noise: f64,
    pub fov_jitter: f64,
    /// Camera position jitter, meters.
    pub position_jitter: f64,
    /// Camera yaw/pitch jitter, radians.
    pub rotation_jitter: f64,
    pub color: bool,
    pub lighting: bool,
    pub texture: bool,
    pub geometry: bool,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            base_colors: [
                [46, 110, 40],   // trees/bushes
                [125, 105, 70],  // ground
                [140, 180, 230], // sky
                [120, 118, 112], // rocks
                [170, 150, 120], // road
                [95, 65, 40],    // logs
            ],
            hue_jitter: 0.08,
            brightness_jitter: 0.3,
            light_direction_jitter: 0.5,
            light_color_jitter: 0.25,
            texture_noise: 0.2,
            fov_jitter: 0.1,
            position_jitter: 0.2,
            rotation_jitter: 0.05,
            color: true,
            lighting: true,
            texture: true,
            geometry: true,
        }
    }
}

impl RandomizationConfig {
    /// Nominal appearance, no jitter on any axis.
    pub fn disabled() -> Self {
        RandomizationConfig {
            color: false,
            lighting: false,
            texture: false,
            geometry: false,
            ..Default::default()
        }
    }

    /// Appearance axes on, camera geometry fixed.
    pub fn appearance_only() -> Self {
        RandomizationConfig {
            geometry: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.hue_jitter,
            self.brightness_jitter,
            self.light_direction_jitter,
            self.light_color_jitter,
            self.texture_noise,
            self.fov_jitter,
            self.position_jitter,
            self.rotation_jitter,
        ];
        if ranges.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig("jitter ranges must be >= 0".into()));
        }
        Ok(())
    }
}

/// Row-major semantic label image, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<ClassId>,
}

impl ClassMap {
    pub fn filled(width: usize, height: usize, class: ClassId) -> Self {
        ClassMap {
            width,
            height,
            data: vec![class; width * height],
        }
    }

    pub fn from_indices(width: usize, height: usize, indices: &[u8]) -> Result<Self> {
        if indices.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: indices.len(),
            });
        }
        let data = indices
            .iter()
            .map(|&i| ClassId::from_index(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassMap { width, height, data })
    }

    pub fn get(&self, row: usize, col: usize) -> ClassId {
        self.data[row * self.width + col]
    }

    pub fn indices(&self) -> Vec<u8> {
        self.data.iter().map(|c| c.index()).collect()
    }

    /// Pixel count per class, in class-index order.
    pub fn histogram(&self) -> [usize; ClassId::COUNT] {
        let mut h = [0; ClassId::COUNT];
        for c in &self.data {
            h[c.index() as usize] += 1;
        }
        h
    }

    /// `C x H x W` one-hot view, channel-major.
    pub fn one_hot(&self) -> Vec<f32> {
        let n = self.width * self.height;
        let mut out = vec![0.0; ClassId::COUNT * n];
        for (p, c) in self.data.iter().enumerate() {
            out[c.index() as usize * n + p] = 1.0;
        }
        out
    }

    pub fn to_gray_image(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width as u32, self.height as u32, self.indices())
            .expect("dimensions match")
    }

    pub fn from_gray_image(img: &image::GrayImage) -> Result<Self> {
        ClassMap::from_indices(img.width() as usize, img.height() as usize, img.as_raw())
    }
}

/// Row-major planar depth in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: RgbImage,
    pub class_map: ClassMap,
    pub depth: DepthMap,
    pub obstacle_mask: Vec<bool>,
}

/// Class map and depth only.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub class_map: ClassMap,
    pub depth: DepthMap,
}

/// Draws the camera for one render, applying geometric jitter if enabled.
fn jittered_camera(camera: &CameraModel, rand: &RandomizationConfig, seed: u64) -> (CameraModel, [f64; 3], f64) {
    if !rand.geometry {
        return (*camera, [0.0; 3], 0.0);
    }
    let mut g = rng::stream(seed, 1);
    let mut u = |w: f64| if w > 0.0 { g.random_range(-w..=w) } else { 0.0 };
    let fov = (camera.fov + u(rand.fov_jitter)).clamp(0.1, std::f64::consts::PI - 0.1);
    let dpos = [u(rand.position_jitter), u(rand.position_jitter), u(rand.position_jitter)];
    let dyaw = u(rand.rotation_jitter);
    let dpitch = u(rand.rotation_jitter);
    let mut cam = *camera;
    cam.fov = fov;
    cam.mount_pitch += dpitch;
    (cam, dpos, dyaw)
}

/// Ground-truth geometry from the nominal (unjittered) camera.
pub fn render_geometry(world: &World, pose: &Pose2, camera: &CameraModel) -> Geometry {
    let frame = CameraFrame::new(world, pose, camera, [0.0; 3], 0.0);
    let hits = raycast::trace(world, &frame, camera);
    geometry_from_hits(&hits, camera)
}

fn geometry_from_hits(hits: &[Hit], camera: &CameraModel) -> Geometry {
    let n = camera.resolution;
    Geometry {
        class_map: ClassMap {
            width: n,
            height: n,
            data: hits.iter().map(|h| h.class).collect(),
        },
        depth: DepthMap {
            width: n,
            height: n,
            data: hits.iter().map(|h| h.depth as f32).collect(),
        },
    }
}

/// Full randomized render: RGB plus pixel-aligned class map, depth and
/// obstacle mask.
pub fn render(
    world: &World,
    pose: &Pose2,
    camera: &CameraModel,
    rand: &RandomizationConfig,
    seed: u64,
) -> RenderOutput {
    let (cam, dpos, dyaw) = jittered_camera(camera, rand, seed);
    let frame = CameraFrame::new(world, pose, &cam, dpos, dyaw);
    let hits = raycast::trace(world, &frame, &cam);
    let rgb = shade::shade(&hits, &cam, rand, seed);
    let Geometry { class_map, depth } = geometry_from_hits(&hits, &cam);
    let obstacle_mask = obstacle_mask(&class_map);
    RenderOutput {
        rgb,
        class_map,
        depth,
        obstacle_mask,
    }
}

/// Palette image of a class map.
pub fn colorize_segmentation(class_map: &ClassMap) -> RgbImage {
    RgbImage::from_fn(class_map.width as u32, class_map.height as u32, |x, y| {
        image::Rgb(class_map.get(y as usize, x as usize).color())
    })
}

/// Palette image from raw class indices; unknown indices are an error.
pub fn colorize_indices(width: usize, height: usize, indices: &[u8]) -> Result<RgbImage> {
    Ok(colorize_segmentation(&ClassMap::from_indices(width, height, indices)?))
}

/// Inverse of [`colorize_segmentation`].
pub fn decolorize(img: &RgbImage) -> Result<ClassMap> {
    let data = img
        .pixels()
        .map(|p| {
            ClassId::from_color(p.0)
                .ok_or_else(|| Error::Format(format!("color {:?} is not in the palette", p.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassMap {
        width: img.width() as usize,
        height: img.height() as usize,
        data,
    })
}

/// True exactly on obstacle classes.
pub fn obstacle_mask(class_map: &ClassMap) -> Vec<bool> {
    class_map.data.iter().map(|c| c.is_obstacle()).collect()
}
