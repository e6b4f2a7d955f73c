use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depth-camera and segmentation imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    /// Standard deviation of additive depth noise (mm).
    pub depth_noise: f64,
    /// Probability that a pixel reports no depth.
    pub dropout: f64,
    /// Exposure analog in [0, 1]; masks are eroded by `round(5 ε)` pixels.
    pub erosion: f64,
    /// Probability of flipping each mask-boundary pixel.
    pub flip_rate: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            depth_noise: 0.0,
            dropout: 0.0,
            erosion: 0.0,
            flip_rate: 0.0,
        }
    }
}

impl SensorModel {
    /// Noise level used for the nominal benchmark runs.
    pub fn nominal() -> Self {
        Self {
            depth_noise: 2.0,
            dropout: 0.0,
            erosion: 0.1,
            flip_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.depth_noise >= 0.0 && self.depth_noise.is_finite()) {
            return Err(Error::config("sensor.depth_noise", "must be non-negative"));
        }
        for (name, p) in [("dropout", self.dropout), ("erosion", self.erosion), ("flip_rate", self.flip_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("sensor.{name}"), "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn erosion_radius(&self) -> u32 {
        (self.erosion * 5.0).round() as u32
    }

    /// Quantized, noisy reading of a true depth at pixel `index`.
    ///
    /// Each pixel draws from its own ChaCha stream, so a reading depends
    /// only on `(seed, index, true_depth)`: any subset of pixels can be
    /// re-measured without rendering the rest.
    pub fn measure(&self, true_depth: f64, index: usize, seed: u64) -> u16 {
        if !(true_depth > 0.0) {
            return 0;
        }
        let mut d = true_depth;
        if self.depth_noise > 0.0 || self.dropout > 0.0 {
            let mut rng = pixel_rng(seed, index as u64);
            if self.dropout > 0.0 && rng.random::<f64>() < self.dropout {
                return 0;
            }
            if self.depth_noise > 0.0 {
                let n = Normal::new(0.0, self.depth_noise).expect("finite sigma");
                d += n.sample(&mut rng);
            }
        }
        d.round().clamp(1.0, u16::MAX as f64) as u16
    }
}

/// Per-pixel generator: stream `index` of the ChaCha8 keyed by `seed`.
pub(crate) fn pixel_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
