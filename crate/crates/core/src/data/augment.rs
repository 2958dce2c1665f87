//! Periphery augmentation: a rectangular k-space frame of random width is
//! multiplied by a random factor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeripheryConfig {
    pub factor: (f64, f64),
    /// Inclusive frame width range in pixels.
    pub width: (usize, usize),
    /// Apply the same frame to input and target.
    pub paired: bool,
}

impl Default for PeripheryConfig {
    fn default() -> Self {
        Self { factor: (0.7, 1.3), width: (5, 40), paired: true }
    }
}

impl PeripheryConfig {
    /// Width range rescaled from 256×256 to a side of `size` pixels.
    pub fn for_size(size: usize) -> Self {
        let base = Self::default();
        let scale = |v: usize| ((v * size) as f64 / 256.0).round().max(1.0) as usize;
        Self { width: (scale(base.width.0), scale(base.width.1)), ..base }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Frame {
        Frame {
            width: rng.gen_range(self.width.0..=self.width.1),
            factor: rng.gen_range(self.factor.0..=self.factor.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub factor: f64,
}

/// Scale every element within `frame.width` of a spatial edge.
pub fn apply_frame(k: &ComplexTensor, frame: Frame) -> Result<ComplexTensor> {
    let (_, h, w) = k.spatial()?;
    if 2 * frame.width >= h.min(w) {
        return Err(Error::Config(format!("frame width {} degenerate for {h}x{w}", frame.width)));
    }
    let mut out = k.clone();
    let fw = frame.width;
    let (re, im) = out.planes_mut();
    for (plane_re, plane_im) in re.chunks_exact_mut(h * w).zip(im.chunks_exact_mut(h * w)) {
        for y in 0..h {
            let edge_row = y < fw || y >= h - fw;
            for x in 0..w {
                if edge_row || x < fw || x >= w - fw {
                    plane_re[y * w + x] *= frame.factor;
                    plane_im[y * w + x] *= frame.factor;
                }
            }
        }
    }
    Ok(out)
}

pub fn periphery_augment(k: &ComplexTensor, cfg: &PeripheryConfig, rng: &mut impl Rng) -> Result<ComplexTensor> {
    apply_frame(k, cfg.sample(rng))
}

/// Augment an input/target pair; the target gets the same frame when paired.
pub fn augment_pair(
    k_in: &ComplexTensor,
    k_target: &ComplexTensor,
    cfg: &PeripheryConfig,
    rng: &mut impl Rng,
) -> Result<(ComplexTensor, ComplexTensor)> {
    let frame = cfg.sample(rng);
    let a = apply_frame(k_in, frame)?;
    let b = if cfg.paired { apply_frame(k_target, frame)? } else { k_target.clone() };
    Ok((a, b))
}
