//! Value-noise heightfield recipes for the three scene presets.

use crate::rng::{hash_unit, mix64};

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lattice(seed: u64, octave: u32, ix: i64, iy: i64) -> f64 {
    let h = mix64(seed ^ mix64(octave as u64 + 0x0C7A))
        ^ mix64(ix as u64).rotate_left(17)
        ^ mix64((iy as u64) ^ 0xA5A5_A5A5_A5A5_A5A5);
    hash_unit(h)
}

/// Smooth value noise in [-1, 1].
pub fn value_noise(seed: u64, octave: u32, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (ix, iy) = (x0 as i64, y0 as i64);
    let (tx, ty) = (smoothstep(x - x0), smoothstep(y - y0));
    let v00 = lattice(seed, octave, ix, iy);
    let v10 = lattice(seed, octave, ix + 1, iy);
    let v01 = lattice(seed, octave, ix, iy + 1);
    let v11 = lattice(seed, octave, ix + 1, iy + 1);
    let a = v00 + (v10 - v00) * tx;
    let b = v01 + (v11 - v01) * tx;
    a + (b - a) * ty
}

/// Fractal sum of `octaves` value-noise layers, normalised to [-1, 1].
pub fn fbm(seed: u64, x: f64, y: f64, wavelength: f64, octaves: u32) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = 1.0 / wavelength;
    for o in 0..octaves {
        sum += amp * value_noise(seed, o, x * freq, y * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relief {
    /// Rolling hills: `amplitude * fbm`.
    Smooth,
    /// Ridged walls around a flat valley floor.
    Ridged,
}

#[derive(Debug, Clone, Copy)]
pub struct TerrainRecipe {
    pub amplitude: f64,
    pub wavelength: f64,
    pub octaves: u32,
    pub relief: Relief,
}

impl TerrainRecipe {
    /// Elevation at world point `(x, y)`; `start` is the episode start point,
    /// around which ridged terrain is kept flat. |h| <= amplitude always.
    pub fn height(&self, seed: u64, x: f64, y: f64, start: (f64, f64)) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let n = fbm(seed, x, y, self.wavelength, self.octaves);
        let h = match self.relief {
            Relief::Smooth => self.amplitude * n,
            Relief::Ridged => {
                let wall = (2.5 * n.abs()).min(1.0);
                let d = ((x - start.0).powi(2) + (y - start.1).powi(2)).sqrt();
                let floor = smoothstep(((d - 8.0) / 12.0).clamp(0.0, 1.0));
                self.amplitude * wall * wall * floor
            }
        };
        h.clamp(-self.amplitude, self.amplitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_bounded_and_deterministic() {
        for i in 0..500 {
            let x = i as f64 * 0.37 - 40.0;
            let y = i as f64 * 0.11 + 3.0;
            let v = fbm(9, x, y, 30.0, 4);
            assert!((-1.0..=1.0).contains(&v));
            assert_eq!(v, fbm(9, x, y, 30.0, 4));
        }
    }

    #[test]
    fn ridged_floor_is_flat_near_start() {
        let r = TerrainRecipe {
            amplitude: 10.0,
            wavelength: 35.0,
            octaves: 4,
            relief: Relief::Ridged,
        };
        assert_eq!(r.height(1, 50.0, 52.0, (50.0, 50.0)), 0.0);
    }
}
