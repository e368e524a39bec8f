//! Procedural off-road scenes: heightmap terrain, typed cylindrical
//! obstacles, an optional road, and the geometric queries the simulator
//! needs (height, attitude, collision).
//!
//! A [`World`] is immutable once generated and can be shared read-only
//! between any number of environment instances.

mod file;
pub mod terrain;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use terrain::{Relief, TerrainRecipe};

pub use file::{WORLD_MAGIC, WORLD_VERSION};

/// Radius of the vehicle disc used for collision checks, in meters.
pub const DEFAULT_FOOTPRINT_RADIUS: f64 = 1.5;

/// Obstacles never come closer than this to the start point (beyond their
/// own radius), so the vehicle always has a free start cell.
pub const START_CLEARANCE: f64 = 3.0;

/// Footprint used for attitude estimation (length along heading, width).
pub const ATTITUDE_FOOTPRINT: (f64, f64) = (3.0, 1.6);

pub const PLACEMENT_ATTEMPTS: usize = 20;

/// The six semantic classes, in their stable index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ClassId {
    TreesBushes = 0,
    Ground = 1,
    Sky = 2,
    Rocks = 3,
    Road = 4,
    Logs = 5,
}

impl ClassId {
    pub const COUNT: usize = 6;
    pub const ALL: [ClassId; 6] = [
        ClassId::TreesBushes,
        ClassId::Ground,
        ClassId::Sky,
        ClassId::Rocks,
        ClassId::Road,
        ClassId::Logs,
    ];
    pub const OBSTACLES: [ClassId; 3] = [ClassId::TreesBushes, ClassId::Rocks, ClassId::Logs];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Result<ClassId> {
        ClassId::ALL
            .get(i as usize)
            .copied()
            .ok_or(Error::UnknownClass(i))
    }

    pub fn is_obstacle(self) -> bool {
        matches!(self, ClassId::TreesBushes | ClassId::Rocks | ClassId::Logs)
    }

    /// Visualization palette.
    pub fn color(self) -> [u8; 3] {
        match self {
            ClassId::TreesBushes => [0, 255, 0],
            ClassId::Ground => [0, 0, 255],
            ClassId::Sky => [0, 0, 0],
            ClassId::Rocks => [255, 0, 0],
            ClassId::Road => [255, 255, 255],
            ClassId::Logs => [128, 0, 128],
        }
    }

    pub fn from_color(rgb: [u8; 3]) -> Option<ClassId> {
        ClassId::ALL.into_iter().find(|c| c.color() == rgb)
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::TreesBushes => "trees_bushes",
            ClassId::Ground => "ground",
            ClassId::Sky => "sky",
            ClassId::Rocks => "rocks",
            ClassId::Road => "road",
            ClassId::Logs => "logs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Meadow,
    Landscape,
    Canyon,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Meadow, Preset::Landscape, Preset::Canyon];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Meadow => "meadow",
            Preset::Landscape => "landscape",
            Preset::Canyon => "canyon",
        }
    }

    pub fn parse(s: &str) -> Result<Preset> {
        match s {
            "meadow" => Ok(Preset::Meadow),
            "landscape" | "landscapes" => Ok(Preset::Landscape),
            "canyon" => Ok(Preset::Canyon),
            _ => Err(Error::InvalidSpec(format!("unknown preset '{s}'"))),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Preset::Meadow => 0,
            Preset::Landscape => 1,
            Preset::Canyon => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Preset> {
        match c {
            0 => Ok(Preset::Meadow),
            1 => Ok(Preset::Landscape),
            2 => Ok(Preset::Canyon),
            _ => Err(Error::Format(format!("unknown preset code {c}"))),
        }
    }

    /// Maximum absolute terrain elevation for this preset, in meters.
    pub fn amplitude(self) -> f64 {
        match self {
            Preset::Meadow => 0.3,
            Preset::Landscape => 3.0,
            Preset::Canyon => 10.0,
        }
    }

    fn recipe(self, amplitude: f64) -> TerrainRecipe {
        let (wavelength, octaves, relief) = match self {
            Preset::Meadow => (40.0, 3, Relief::Smooth),
            Preset::Landscape => (30.0, 4, Relief::Smooth),
            Preset::Canyon => (35.0, 4, Relief::Ridged),
        };
        TerrainRecipe {
            amplitude,
            wavelength,
            octaves,
            relief,
        }
    }

    pub fn default_densities(self) -> ObstacleDensities {
        match self {
            Preset::Meadow => ObstacleDensities {
                trees: 0.05,
                rocks: 0.05,
                logs: 0.02,
            },
            Preset::Landscape => ObstacleDensities {
                trees: 0.3,
                rocks: 0.1,
                logs: 0.05,
            },
            Preset::Canyon => ObstacleDensities {
                trees: 0.03,
                rocks: 0.3,
                logs: 0.02,
            },
        }
    }

    fn default_road(self) -> Option<RoadSpec> {
        match self {
            Preset::Landscape => Some(RoadSpec {
                width: 4.0,
                waypoints: 5,
            }),
            _ => None,
        }
    }
}

/// Obstacle counts per 100 m², per obstacle class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObstacleDensities {
    pub trees: f64,
    pub rocks: f64,
    pub logs: f64,
}

impl ObstacleDensities {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn get(&self, class: ClassId) -> f64 {
        match class {
            ClassId::TreesBushes => self.trees,
            ClassId::Rocks => self.rocks,
            ClassId::Logs => self.logs,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub width: f64,
    pub waypoints: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub seed: u64,
    pub preset: Preset,
    /// Side of the square world, meters.
    pub extent: f64,
    /// Heightmap cell size, meters.
    pub grid_resolution: f64,
    pub densities: ObstacleDensities,
    pub road: Option<RoadSpec>,
    /// Overrides the preset amplitude; `Some(0.0)` gives perfectly flat terrain.
    pub terrain_amplitude: Option<f64>,
}

impl WorldSpec {
    pub fn new(preset: Preset, seed: u64) -> Self {
        WorldSpec {
            seed,
            preset,
            extent: 100.0,
            grid_resolution: 0.5,
            densities: preset.default_densities(),
            road: preset.default_road(),
            terrain_amplitude: None,
        }
    }

    /// A perfectly flat, obstacle-free world of the given preset.
    pub fn empty_flat(preset: Preset, seed: u64) -> Self {
        WorldSpec {
            densities: ObstacleDensities::zero(),
            road: None,
            terrain_amplitude: Some(0.0),
            ..WorldSpec::new(preset, seed)
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.terrain_amplitude
            .unwrap_or_else(|| self.preset.amplitude())
    }

    pub fn grid_size(&self) -> usize {
        (self.extent / self.grid_resolution).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return bad(format!("extent must be > 0, got {}", self.extent));
        }
        if !(self.grid_resolution.is_finite() && self.grid_resolution > 0.0) {
            return bad(format!(
                "grid_resolution must be > 0, got {}",
                self.grid_resolution
            ));
        }
        if self.grid_size() < 2 {
            return bad("extent must span at least two grid cells".into());
        }
        let d = self.densities;
        for (name, v) in [("trees", d.trees), ("rocks", d.rocks), ("logs", d.logs)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} density must be >= 0, got {v}"));
            }
        }
        if let Some(a) = self.terrain_amplitude {
            if !(a.is_finite() && a >= 0.0) {
                return bad(format!("terrain amplitude must be >= 0, got {a}"));
            }
        }
        if let Some(r) = self.road {
            if !(r.width > 0.0) || r.waypoints < 2 {
                return bad("road needs width > 0 and at least 2 waypoints".into());
            }
        }
        Ok(())
    }
}

/// A vertical cylinder: disc footprint plus height above the local terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub class: ClassId,
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

/// Roll and pitch of a vehicle footprint resting on the terrain, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    spec: WorldSpec,
    n: usize,
    heights: Vec<f64>,
    obstacles: Vec<Obstacle>,
    road_mask: Vec<bool>,
    min_height: f64,
    max_height: f64,
    max_gradient: f64,
}

/// Generate the scene described by `spec`. Pure function of the spec.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let n = spec.grid_size();
    let res = spec.grid_resolution;
    let start = (spec.extent / 2.0, spec.extent / 2.0);
    let recipe = spec.preset.recipe(spec.amplitude());
    let terrain_seed = rng::derive(spec.seed, 1);
    let mut heights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            heights.push(recipe.height(terrain_seed, i as f64 * res, j as f64 * res, start));
        }
    }
    let road_mask = match spec.road {
        Some(road) => rasterize_road(spec, road),
        None => vec![false; n * n],
    };
    let mut world = World::from_parts(spec.clone(), heights, Vec::new(), road_mask)?;
    world.obstacles = place_obstacles(spec, &world);
    Ok(world)
}

/// Stream id used for obstacle placement of a class; tests reproduce the
/// placement recipe from it.
pub fn obstacle_stream(class: ClassId) -> u64 {
    100 + class.index() as u64
}

/// Radius and height ranges per obstacle class.
pub fn obstacle_dims(class: ClassId) -> ((f64, f64), (f64, f64)) {
    match class {
        ClassId::TreesBushes => ((0.5, 1.5), (3.0, 8.0)),
        ClassId::Rocks => ((0.4, 1.2), (0.4, 1.5)),
        // Log thickness and length.
        ClassId::Logs => ((0.25, 0.4), (3.0, 6.0)),
        _ => unreachable!("not an obstacle class"),
    }
}

fn place_obstacles(spec: &WorldSpec, world: &World) -> Vec<Obstacle> {
    let extent = spec.extent;
    let start = world.start_position();
    let clear_of_start =
        |c: [f64; 2], r: f64| dist(c, start) >= r + START_CLEARANCE + DEFAULT_FOOTPRINT_RADIUS;
    let in_bounds = |c: [f64; 2]| (0.0..=extent).contains(&c[0]) && (0.0..=extent).contains(&c[1]);
    let mut out = Vec::new();
    for class in ClassId::OBSTACLES {
        let mean = spec.densities.get(class) * extent * extent / 100.0;
        if mean <= 0.0 {
            continue;
        }
        let mut rng = rng::stream(spec.seed, obstacle_stream(class));
        let count = Poisson::new(mean)
            .map(|p| p.sample(&mut rng) as usize)
            .unwrap_or(0);
        let ((r_lo, r_hi), (h_lo, h_hi)) = obstacle_dims(class);
        for _ in 0..count {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let c = [rng.random::<f64>() * extent, rng.random::<f64>() * extent];
                let a = rng.random_range(r_lo..r_hi);
                let b = rng.random_range(h_lo..h_hi);
                if class == ClassId::Logs {
                    // Capsule approximated by 2-4 overlapping discs.
                    let heading = rng.random::<f64>() * std::f64::consts::PI;
                    let (thickness, length) = (a, b);
                    let discs = ((length / 1.5).round() as usize).clamp(2, 4);
                    let spacing = length / discs as f64;
                    let radius = thickness.max(0.6 * spacing);
                    let parts: Vec<Obstacle> = (0..discs)
                        .map(|k| {
                            let off = (k as f64 + 0.5) * spacing - length / 2.0;
                            Obstacle {
                                class,
                                center: [c[0] + off * heading.cos(), c[1] + off * heading.sin()],
                                radius,
                                height: 2.0 * thickness,
                            }
                        })
                        .collect();
                    if parts.iter().all(|p| {
                        in_bounds(p.center)
                            && clear_of_start(p.center, p.radius)
                            && !world.road_at(p.center[0], p.center[1])
                    }) {
                        out.extend(parts);
                        break;
                    }
                } else if clear_of_start(c, a) && !world.road_at(c[0], c[1]) {
                    out.push(Obstacle {
                        class,
                        center: c,
                        radius: a,
                        height: b,
                    });
                    break;
                }
            }
        }
    }
    out
}

fn rasterize_road(spec: &WorldSpec, road: RoadSpec) -> Vec<bool> {
    let n = spec.grid_size();
    let res = spec.grid_resolution;
    let mut rng = rng::stream(spec.seed, 7);
    let k = road.waypoints as usize;
    let pts: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            [
                spec.extent * i as f64 / (k - 1) as f64,
                spec.extent * rng.random_range(0.2..0.8),
            ]
        })
        .collect();
    let half = road.width / 2.0;
    let mut mask = vec![false; n * n];
    for j in 0..n {
        for i in 0..n {
            let p = [i as f64 * res, j as f64 * res];
            mask[j * n + i] = pts
                .windows(2)
                .any(|w| point_segment_distance(p, w[0], w[1]) <= half);
        }
    }
    mask
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl World {
    /// Assemble a world from explicit grids, e.g. for constructed test scenes.
    pub fn from_parts(
        spec: WorldSpec,
        heights: Vec<f64>,
        obstacles: Vec<Obstacle>,
        road_mask: Vec<bool>,
    ) -> Result<World> {
        spec.validate()?;
        let n = spec.grid_size();
        if heights.len() != n * n || road_mask.len() != n * n {
            return Err(Error::InvalidSpec(format!(
                "grids must be {n}x{n} (got {} heights, {} road cells)",
                heights.len(),
                road_mask.len()
            )));
        }
        if let Some(h) = heights.iter().find(|h| !h.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite elevation {h}")));
        }
        for o in &obstacles {
            if !o.class.is_obstacle() {
                return Err(Error::InvalidSpec(format!(
                    "{} is not an obstacle class",
                    o.class.name()
                )));
            }
            let inside = |v: f64| (0.0..=spec.extent).contains(&v);
            if !(inside(o.center[0]) && inside(o.center[1])) || !(o.radius > 0.0) {
                return Err(Error::InvalidSpec(format!("obstacle out of bounds: {o:?}")));
            }
        }
        let min_height = heights.iter().copied().fold(f64::INFINITY, f64::min);
        let max_height = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Bound on the horizontal slope of the bilinear surface in any direction.
        let (mut gx, mut gy) = (0.0f64, 0.0f64);
        for j in 0..n {
            for i in 0..n {
                let h = heights[j * n + i];
                if i + 1 < n {
                    gx = gx.max((heights[j * n + i + 1] - h).abs());
                }
                if j + 1 < n {
                    gy = gy.max((heights[(j + 1) * n + i] - h).abs());
                }
            }
        }
        let max_gradient = (gx + gy) / spec.grid_resolution;
        Ok(World {
            spec,
            n,
            heights,
            obstacles,
            road_mask,
            min_height,
            max_height,
            max_gradient,
        })
    }

    /// Flat terrain at zero elevation with the given obstacles.
    pub fn flat_with_obstacles(spec: WorldSpec, obstacles: Vec<Obstacle>) -> Result<World> {
        let n = spec.grid_size();
        World::from_parts(spec, vec![0.0; n * n], obstacles, vec![false; n * n])
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }
    pub fn extent(&self) -> f64 {
        self.spec.extent
    }
    pub fn resolution(&self) -> f64 {
        self.spec.grid_resolution
    }
    /// Nodes per side.
    pub fn grid_size(&self) -> usize {
        self.n
    }
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }
    pub fn road_mask(&self) -> &[bool] {
        &self.road_mask
    }
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }
    pub fn min_height(&self) -> f64 {
        self.min_height
    }
    pub fn max_height(&self) -> f64 {
        self.max_height
    }
    /// Upper bound on terrain slope (rise per meter) in any direction.
    pub fn max_gradient(&self) -> f64 {
        self.max_gradient
    }
    pub fn is_flat(&self) -> bool {
        self.min_height == self.max_height
    }

    /// Where episodes start; guaranteed clear of generated obstacles.
    pub fn start_position(&self) -> [f64; 2] {
        [self.spec.extent / 2.0, self.spec.extent / 2.0]
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        (0.0..=self.spec.extent).contains(&x) && (0.0..=self.spec.extent).contains(&y)
    }

    pub fn node_height(&self, i: usize, j: usize) -> f64 {
        self.heights[j * self.n + i]
    }

    /// Bilinear terrain elevation; out-of-bounds queries clamp to the edge.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        self.height_at_checked(x, y).0
    }

    /// Like [`World::height_at`] but also reports whether the query was clamped.
    pub fn height_at_checked(&self, x: f64, y: f64) -> (f64, bool) {
        let res = self.spec.grid_resolution;
        let last = (self.n - 1) as f64;
        let gx = x / res;
        let gy = y / res;
        let clamped = !(0.0..=last).contains(&gx) || !(0.0..=last).contains(&gy);
        let gx = gx.clamp(0.0, last);
        let gy = gy.clamp(0.0, last);
        let i0 = (gx.floor() as usize).min(self.n - 2);
        let j0 = (gy.floor() as usize).min(self.n - 2);
        let tx = gx - i0 as f64;
        let ty = gy - j0 as f64;
        let h00 = self.node_height(i0, j0);
        let h10 = self.node_height(i0 + 1, j0);
        let h01 = self.node_height(i0, j0 + 1);
        let h11 = self.node_height(i0 + 1, j0 + 1);
        let a = h00 + (h10 - h00) * tx;
        let b = h01 + (h11 - h01) * tx;
        (a + (b - a) * ty, clamped)
    }

    /// Terrain normal (unnormalised gradient form `(-dh/dx, -dh/dy, 1)`).
    pub fn normal_at(&self, x: f64, y: f64) -> [f64; 3] {
        let e = self.spec.grid_resolution * 0.5;
        let dx = (self.height_at(x + e, y) - self.height_at(x - e, y)) / (2.0 * e);
        let dy = (self.height_at(x, y + e) - self.height_at(x, y - e)) / (2.0 * e);
        let norm = (dx * dx + dy * dy + 1.0).sqrt();
        [-dx / norm, -dy / norm, 1.0 / norm]
    }

    pub fn road_at(&self, x: f64, y: f64) -> bool {
        let res = self.spec.grid_resolution;
        let i = ((x / res).round().max(0.0) as usize).min(self.n - 1);
        let j = ((y / res).round().max(0.0) as usize).min(self.n - 1);
        self.road_mask[j * self.n + i]
    }

    /// Class of the terrain surface at a point (road or ground).
    pub fn ground_class_at(&self, x: f64, y: f64) -> ClassId {
        if self.road_at(x, y) {
            ClassId::Road
        } else {
            ClassId::Ground
        }
    }

    /// Roll/pitch (degrees) of a footprint aligned to `yaw` resting on the
    /// least-squares plane through the terrain under its four corners.
    pub fn surface_attitude(&self, x: f64, y: f64, yaw: f64) -> Attitude {
        let (len, wid) = ATTITUDE_FOOTPRINT;
        let (c, s) = (yaw.cos(), yaw.sin());
        let mut su = 0.0;
        let mut sv = 0.0;
        let mut suu = 0.0;
        let mut svv = 0.0;
        let mut zs = [0.0; 4];
        let corners = [
            (len / 2.0, wid / 2.0),
            (len / 2.0, -wid / 2.0),
            (-len / 2.0, wid / 2.0),
            (-len / 2.0, -wid / 2.0),
        ];
        for (k, &(u, v)) in corners.iter().enumerate() {
            zs[k] = self.height_at(x + u * c - v * s, y + u * s + v * c);
        }
        let zmean = zs.iter().sum::<f64>() / 4.0;
        for (k, &(u, v)) in corners.iter().enumerate() {
            su += u * (zs[k] - zmean);
            sv += v * (zs[k] - zmean);
            suu += u * u;
            svv += v * v;
        }
        // Corners are symmetric, so the plane fit decouples per axis.
        let slope_u = su / suu;
        let slope_v = sv / svv;
        let pitch = slope_u.atan();
        let roll = (slope_v / ((1.0 + slope_u * slope_u) * (1.0 + slope_u * slope_u + slope_v * slope_v)).sqrt())
            .asin();
        Attitude {
            roll: roll.to_degrees(),
            pitch: pitch.to_degrees(),
        }
    }

    /// True iff a vehicle disc at `(x, y)` strictly overlaps any obstacle disc.
    pub fn query_collision(&self, x: f64, y: f64, footprint_radius: f64) -> bool {
        self.obstacles
            .iter()
            .any(|o| discs_overlap([x, y], footprint_radius, o.center, o.radius))
    }

    /// True iff `p` lies strictly inside some obstacle disc.
    pub fn inside_obstacle(&self, p: [f64; 2]) -> bool {
        self.obstacles
            .iter()
            .any(|o| dist(p, o.center) < o.radius)
    }

    /// Semantic class of the top-down view at a point.
    pub fn top_down_class(&self, x: f64, y: f64) -> ClassId {
        self.obstacles
            .iter()
            .find(|o| dist([x, y], o.center) < o.radius)
            .map(|o| o.class)
            .unwrap_or_else(|| self.ground_class_at(x, y))
    }
}

pub fn discs_overlap(a: [f64; 2], ra: f64, b: [f64; 2], rb: f64) -> bool {
    dist(a, b) < ra + rb
}
