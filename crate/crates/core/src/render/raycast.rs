//! One ray per pixel against the heightfield and obstacle cylinders.

use rayon::prelude::*;

use super::CameraModel;
use crate::vehicle::Pose2;
use crate::world::{ClassId, World};

type V3 = [f64; 3];

fn mat_vec(m: &[[f64; 3]; 3], v: V3) -> V3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn rot_z(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Positive angle tips +x toward -z.
fn rot_y(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_x(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

/// Camera origin and axes in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub origin: V3,
    pub forward: V3,
    pub left: V3,
    pub up: V3,
}

impl CameraFrame {
    /// Camera on a vehicle at `pose` resting on the terrain. `dpos` and
    /// `dyaw` perturb the mount (vehicle frame).
    pub fn new(world: &World, pose: &Pose2, camera: &CameraModel, dpos: V3, dyaw: f64) -> Self {
        let att = world.surface_attitude(pose.x, pose.y, pose.yaw);
        let body = mat_mul(
            &mat_mul(&rot_z(pose.yaw), &rot_y(-att.pitch.to_radians())),
            &rot_x(att.roll.to_radians()),
        );
        let cam = mat_mul(&body, &mat_mul(&rot_z(dyaw), &rot_y(-camera.mount_pitch)));
        let m = camera.mount_offset;
        let off = mat_vec(&body, [m[0] + dpos[0], m[1] + dpos[1], m[2] + dpos[2]]);
        let z = world.height_at(pose.x, pose.y);
        CameraFrame {
            origin: [pose.x + off[0], pose.y + off[1], z + off[2]],
            forward: mat_vec(&cam, [1.0, 0.0, 0.0]),
            left: mat_vec(&cam, [0.0, 1.0, 0.0]),
            up: mat_vec(&cam, [0.0, 0.0, 1.0]),
        }
    }

    /// Ray direction through the centre of pixel `(row, col)`. The forward
    /// component is 1, so the ray parameter equals planar depth.
    pub fn ray(&self, camera: &CameraModel, row: usize, col: usize) -> V3 {
        let n = camera.resolution as f64;
        let th = (camera.fov / 2.0).tan();
        let l = (1.0 - 2.0 * (col as f64 + 0.5) / n) * th;
        let v = (1.0 - 2.0 * (row as f64 + 0.5) / n) * th;
        [
            self.forward[0] + l * self.left[0] + v * self.up[0],
            self.forward[1] + l * self.left[1] + v * self.up[1],
            self.forward[2] + l * self.left[2] + v * self.up[2],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub class: ClassId,
    /// Planar depth; `max_range` for sky.
    pub depth: f64,
    pub point: V3,
    /// Unit surface normal (sky: unit ray direction).
    pub normal: V3,
}

struct Cylinder {
    class: ClassId,
    center: [f64; 2],
    r2: f64,
    radius: f64,
    base: f64,
    top: f64,
}

const EPS: f64 = 1e-6;

fn cylinder_hit(o: V3, d: V3, c: &Cylinder) -> Option<(f64, V3)> {
    let ox = o[0] - c.center[0];
    let oy = o[1] - c.center[1];
    let a = d[0] * d[0] + d[1] * d[1];
    let cc = ox * ox + oy * oy - c.r2;
    let mut best: Option<(f64, V3)> = None;
    let (t1, t2) = if a > 1e-12 {
        let b = 2.0 * (ox * d[0] + oy * d[1]);
        let disc = b * b - 4.0 * a * cc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a))
    } else if cc < 0.0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        return None;
    };
    if t2 < EPS {
        return None;
    }
    if t1 > EPS {
        let z = o[2] + t1 * d[2];
        if z >= c.base && z <= c.top {
            let px = ox + t1 * d[0];
            let py = oy + t1 * d[1];
            best = Some((t1, [px / c.radius, py / c.radius, 0.0]));
        }
    }
    if d[2] < 0.0 {
        let tc = (c.top - o[2]) / d[2];
        if tc > EPS && tc >= t1 && tc <= t2 && best.is_none_or(|(t, _)| tc < t) {
            best = Some((tc, [0.0, 0.0, 1.0]));
        }
    }
    best
}

fn terrain_hit(world: &World, o: V3, d: V3, tmax: f64) -> Option<f64> {
    let max_h = world.max_height();
    if world.is_flat() {
        if d[2] < 0.0 && o[2] > max_h {
            let t = (max_h - o[2]) / d[2];
            return (t <= tmax).then_some(t);
        }
        return None;
    }
    let dxy = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let rate = world.max_gradient() * dxy + (-d[2]).max(0.0);
    let min_step = (world.resolution() * 0.25 / dxy.max(1e-9)).min(0.5);
    let gap = |t: f64| {
        let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
        p[2] - world.height_at(p[0], p[1])
    };
    let mut t_prev = 0.0;
    let mut t: f64 = 1e-3;
    if o[2] > max_h {
        if d[2] >= 0.0 {
            return None;
        }
        t = t.max((max_h - o[2]) / d[2]);
    }
    while t <= tmax {
        let g = gap(t);
        if g <= 0.0 {
            let (mut lo, mut hi) = (t_prev, t);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
        if d[2] >= 0.0 && o[2] + t * d[2] > max_h {
            return None;
        }
        t_prev = t;
        t += if rate > 0.0 { (g / rate).max(min_step) } else { min_step };
    }
    None
}

fn normalize(v: V3) -> V3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cylinders(world: &World) -> Vec<Cylinder> {
    world
        .obstacles()
        .iter()
        .map(|ob| {
            let h = world.height_at(ob.center[0], ob.center[1]);
            Cylinder {
                class: ob.class,
                center: ob.center,
                r2: ob.radius * ob.radius,
                radius: ob.radius,
                // Sunk into the ground so sloped terrain leaves no gap.
                base: h - ob.radius,
                top: h + ob.height,
            }
        })
        .collect()
}

fn trace_ray(world: &World, cyls: &[Cylinder], o: V3, d: V3, max_range: f64) -> Hit {
    let mut best_t = max_range;
    let mut best: Option<(ClassId, V3)> = None;
    for c in cyls {
        if let Some((t, n)) = cylinder_hit(o, d, c) {
            if t <= best_t {
                best_t = t;
                best = Some((c.class, n));
            }
        }
    }
    if let Some(t) = terrain_hit(world, o, d, best_t) {
        if t < best_t || best.is_none() {
            let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
            return Hit {
                class: world.ground_class_at(p[0], p[1]),
                depth: t,
                point: p,
                normal: world.normal_at(p[0], p[1]),
            };
        }
    }
    match best {
        Some((class, normal)) => Hit {
            class,
            depth: best_t,
            point: [o[0] + best_t * d[0], o[1] + best_t * d[1], o[2] + best_t * d[2]],
            normal,
        },
        None => Hit {
            class: ClassId::Sky,
            depth: max_range,
            point: [o[0] + max_range * d[0], o[1] + max_range * d[1], o[2] + max_range * d[2]],
            normal: normalize(d),
        },
    }
}

/// Row-major hits for every pixel.
pub(crate) fn trace(world: &World, frame: &CameraFrame, camera: &CameraModel) -> Vec<Hit> {
    let n = camera.resolution;
    let cyls = cylinders(world);
    (0..n)
        .into_par_iter()
        .flat_map_iter(|row| {
            let cyls = &cyls;
            (0..n).map(move |col| trace_ray(world, cyls, frame.origin, frame.ray(camera, row, col), camera.max_range))
        })
        .collect()
}
