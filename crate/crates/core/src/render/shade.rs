//! Appearance randomization: class color jitter, Lambertian lighting with a
//! jittered light, and per-class speckle. Reads hits, never moves them.

use image::{Rgb, RgbImage};
use rand::Rng;

use super::{CameraModel, Hit, RandomizationConfig};
use crate::rng;
use crate::world::ClassId;

const AMBIENT: f64 = 0.35;
const LIGHT_AZIMUTH: f64 = 0.8;
const LIGHT_ELEVATION: f64 = 0.9;

/// Speckle cell size per class, meters.
const SPECKLE_CELL: [f64; ClassId::COUNT] = [0.15, 0.4, 1.0, 0.2, 0.3, 0.1];

fn rgb_to_hsv(c: [f64; 3]) -> [f64; 3] {
    let max = c[0].max(c[1]).max(c[2]);
    let min = c[0].min(c[1]).min(c[2]);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == c[0] {
        ((c[1] - c[2]) / d).rem_euclid(6.0) / 6.0
    } else if max == c[1] {
        ((c[2] - c[0]) / d + 2.0) / 6.0
    } else {
        ((c[0] - c[1]) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

struct Appearance {
    colors: [[f64; 3]; ClassId::COUNT],
    light_dir: [f64; 3],
    tint: [f64; 3],
    texture_seed: u64,
}

fn draw_appearance(rand: &RandomizationConfig, seed: u64) -> Appearance {
    // Every draw happens whether or not its axis is enabled, so toggling one
    // axis leaves the others' values unchanged.
    let mut g = rng::stream(seed, 2);
    let mut u = |w: f64| {
        let x: f64 = g.random_range(-1.0..=1.0);
        x * w
    };
    let mut colors = [[0.0; 3]; ClassId::COUNT];
    for (k, out) in colors.iter_mut().enumerate() {
        let base = rand.base_colors[k].map(|c| c as f64 / 255.0);
        let dh = u(rand.hue_jitter);
        let db = u(rand.brightness_jitter);
        *out = if rand.color {
            let mut hsv = rgb_to_hsv(base);
            hsv[0] += dh;
            hsv[2] = (hsv[2] * (1.0 + db)).clamp(0.0, 1.0);
            hsv_to_rgb(hsv)
        } else {
            base
        };
    }
    let daz = u(rand.light_direction_jitter);
    let del = u(rand.light_direction_jitter);
    let tint = [u(rand.light_color_jitter), u(rand.light_color_jitter), u(rand.light_color_jitter)];
    let texture_seed = g.random::<u64>();
    let (az, el, tint) = if rand.lighting {
        (
            LIGHT_AZIMUTH + daz,
            (LIGHT_ELEVATION + del).clamp(0.15, 1.5),
            tint.map(|t| (1.0 + t).max(0.0)),
        )
    } else {
        (LIGHT_AZIMUTH, LIGHT_ELEVATION, [1.0; 3])
    };
    Appearance {
        colors,
        light_dir: [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()],
        tint,
        texture_seed,
    }
}

fn speckle(seed: u64, class: ClassId, p: [f64; 3]) -> f64 {
    let cell = SPECKLE_CELL[class.index() as usize];
    let q = |v: f64| (v / cell).floor() as i64 as u64;
    let h = rng::mix64(seed ^ rng::mix64(q(p[0]) ^ rng::mix64(q(p[1]) ^ rng::mix64(q(p[2]).wrapping_add(class.index() as u64)))));
    rng::hash_unit(h)
}

pub(crate) fn shade(hits: &[Hit], camera: &CameraModel, rand: &RandomizationConfig, seed: u64) -> RgbImage {
    let app = draw_appearance(rand, seed);
    let n = camera.resolution as u32;
    RgbImage::from_fn(n, n, |x, y| {
        let h = &hits[(y * n + x) as usize];
        let base = app.colors[h.class.index() as usize];
        let mut c = if h.class == ClassId::Sky {
            // Brighter toward the zenith.
            let k = 0.85 + 0.15 * h.normal[2].max(0.0);
            [base[0] * k, base[1] * k, base[2] * k]
        } else {
            let l = &app.light_dir;
            let lambert = (h.normal[0] * l[0] + h.normal[1] * l[1] + h.normal[2] * l[2]).max(0.0);
            let k = AMBIENT + (1.0 - AMBIENT) * lambert;
            let mut c = [base[0] * k, base[1] * k, base[2] * k];
            if rand.texture {
                let s = 1.0 + rand.texture_noise * speckle(app.texture_seed, h.class, h.point);
                c = c.map(|v| v * s);
            }
            c
        };
        for (v, t) in c.iter_mut().zip(app.tint) {
            *v *= t;
        }
        Rgb(c.map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8))
    })
}
