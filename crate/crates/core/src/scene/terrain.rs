use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

/// Settings for the sand heightfield.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainSpec {
    /// Peak deviation from the mean height (mm). Zero gives a flat plane.
    pub amplitude: f64,
    pub pitch: f64,
    pub min: [f64; 2],
    pub max: [f64; 2],
    /// Range of ripple wavelengths (mm).
    pub wavelength: [f64; 2],
    pub components: usize,
    pub base_height: f64,
}

impl Default for TerrainSpec {
    fn default() -> Self {
        Self {
            amplitude: 2.0,
            pitch: 5.0,
            min: [-100.0, -600.0],
            max: [900.0, 600.0],
            wavelength: [150.0, 400.0],
            components: 4,
            base_height: 0.0,
        }
    }
}

impl TerrainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch > 0.0) {
            return Err(Error::config("scene.terrain.pitch", "must be positive"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::config("scene.terrain.amplitude", "must be non-negative"));
        }
        if self.max[0] <= self.min[0] || self.max[1] <= self.min[1] {
            return Err(Error::config("scene.terrain.max", "must exceed min"));
        }
        if !(self.wavelength[0] > 0.0 && self.wavelength[1] >= self.wavelength[0]) {
            return Err(Error::config("scene.terrain.wavelength", "need 0 < low <= high"));
        }
        Ok(())
    }
}

/// Regular heightfield; heights are bilinearly interpolated and clamped to
/// the edge outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terrain {
    pub origin: [f64; 2],
    pub pitch: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major (`iy * nx + ix`) heights in mm.
    pub heights: Vec<f64>,
}

impl Terrain {
    pub fn flat(spec: &TerrainSpec, z: f64) -> Self {
        let (nx, ny) = grid_size(spec);
        Self {
            origin: spec.min,
            pitch: spec.pitch,
            nx,
            ny,
            heights: vec![z; nx * ny],
        }
    }

    /// Sum of a few random plane waves, scaled so the peak deviation equals
    /// the amplitude.
    pub fn generate<R: Rng>(spec: &TerrainSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut t = Self::flat(spec, spec.base_height);
        if spec.amplitude == 0.0 || spec.components == 0 {
            return Ok(t);
        }
        let waves: Vec<(f64, f64, f64, f64)> = (0..spec.components)
            .map(|_| {
                let lambda = rng.random_range(spec.wavelength[0]..=spec.wavelength[1]);
                let dir = rng.random_range(0.0..std::f64::consts::TAU);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let weight = rng.random_range(0.5..1.0);
                let k = std::f64::consts::TAU / lambda;
                (k * dir.cos(), k * dir.sin(), phase, weight)
            })
            .collect();
        let mut raw = vec![0.0; t.heights.len()];
        for iy in 0..t.ny {
            for ix in 0..t.nx {
                let x = t.origin[0] + ix as f64 * t.pitch;
                let y = t.origin[1] + iy as f64 * t.pitch;
                raw[iy * t.nx + ix] = waves.iter().map(|&(kx, ky, ph, w)| w * (kx * x + ky * y + ph).sin()).sum();
            }
        }
        let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if peak > 0.0 { spec.amplitude / peak } else { 0.0 };
        for (h, r) in t.heights.iter_mut().zip(raw) {
            *h += r * scale;
        }
        Ok(t)
    }

    #[inline]
    fn at(&self, ix: usize, iy: usize) -> f64 {
        self.heights[iy * self.nx + ix]
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.origin[0]) / self.pitch).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.origin[1]) / self.pitch).clamp(0.0, (self.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let iy = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        if self.nx < 2 || self.ny < 2 {
            return self.heights[0];
        }
        let h00 = self.at(ix, iy);
        let h10 = self.at(ix + 1, iy);
        let h01 = self.at(ix, iy + 1);
        let h11 = self.at(ix + 1, iy + 1);
        h00 * (1.0 - tx) * (1.0 - ty) + h10 * tx * (1.0 - ty) + h01 * (1.0 - tx) * ty + h11 * tx * ty
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Steepest cell slope, in degrees.
    pub fn max_slope_deg(&self) -> f64 {
        let mut m = 0.0f64;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if ix + 1 < self.nx {
                    m = m.max((self.at(ix + 1, iy) - self.at(ix, iy)).abs() / self.pitch);
                }
                if iy + 1 < self.ny {
                    m = m.max((self.at(ix, iy + 1) - self.at(ix, iy)).abs() / self.pitch);
                }
            }
        }
        m.atan().to_degrees()
    }

    /// First crossing of the downward ray `o + t d` with the surface.
    ///
    /// Fixed-point iteration on `t = (h(xy(t)) - o.z) / d.z` converges
    /// quickly for gentle terrain and steep rays; a bracketed march covers
    /// the remaining cases.
    pub fn intersect(&self, o: &Point3, d: &Vec3) -> Option<f64> {
        if d.z >= -1e-9 {
            return None;
        }
        let f = |t: f64| {
            let p = o + d * t;
            p.z - self.height(p.x, p.y)
        };
        if f(0.0) <= 0.0 {
            return Some(0.0);
        }
        let mut t = ((self.height(o.x, o.y) - o.z) / d.z).max(0.0);
        for _ in 0..30 {
            let p = o + d * t;
            let next = ((self.height(p.x, p.y) - o.z) / d.z).max(0.0);
            if (next - t).abs() < 1e-7 {
                return Some(next);
            }
            t = next;
        }
        // Bracket between the top of the terrain band and the bottom.
        let t_hi = ((self.min_height() - o.z) / d.z).max(0.0) + 1.0;
        let t_lo = ((self.max_height() - o.z) / d.z).max(0.0);
        let step = self.pitch / 4.0;
        let mut a = t_lo;
        while a < t_hi {
            let b = (a + step).min(t_hi);
            if f(b) <= 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            a = b;
        }
        None
    }
}

fn grid_size(spec: &TerrainSpec) -> (usize, usize) {
    let nx = ((spec.max[0] - spec.min[0]) / spec.pitch).ceil() as usize + 1;
    let ny = ((spec.max[1] - spec.min[1]) / spec.pitch).ceil() as usize + 1;
    (nx.max(2), ny.max(2))
}
