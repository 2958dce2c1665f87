//! 8-bit grayscale renderings and PNG export.

use std::path::Path;

use super::{binarize_with, to_image};
use crate::ctensor::ComplexTensor;
use crate::data::SliceSample;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    fn from_mask(m: &BinaryMask) -> Self {
        let (h, w) = m.shape();
        Self { width: w, height: h, pixels: m.bits().iter().map(|&b| if b { 255 } else { 0 }).collect() }
    }

    /// Side by side, separated by `gap` black columns.
    pub fn hstack(parts: &[GrayImage], gap: usize) -> Result<Self> {
        let height = parts.first().map_or(0, |p| p.height);
        if parts.iter().any(|p| p.height != height) {
            return Err(Error::Dimension("panel heights differ".into()));
        }
        let width = parts.iter().map(|p| p.width).sum::<usize>() + gap * parts.len().saturating_sub(1);
        let mut pixels = vec![0u8; width * height];
        let mut x0 = 0;
        for p in parts {
            for y in 0..height {
                pixels[y * width + x0..y * width + x0 + p.width].copy_from_slice(&p.pixels[y * p.width..(y + 1) * p.width]);
            }
            x0 += p.width + gap;
        }
        Ok(Self { width, height, pixels })
    }
}

/// Linearly rescale `values` so the maximum maps to 255; all-zero input
/// stays black.
fn rescale(values: &[f64], width: usize, height: usize) -> GrayImage {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels = values
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect();
    GrayImage { width, height, pixels }
}

fn single_plane(t: &ComplexTensor) -> Result<(usize, usize)> {
    let (planes, h, w) = t.spatial()?;
    if planes != 1 {
        return Err(Error::Dimension(format!("expected a single slice, got {:?}", t.shape())));
    }
    Ok((h, w))
}

/// `log(1 + |k|)` rescaled to `[0, 255]`.
pub fn log_kspace_u8(k: &ComplexTensor) -> Result<GrayImage> {
    let (h, w) = single_plane(k)?;
    Ok(rescale(k.log1p_abs().data(), w, h))
}

/// Image magnitude rescaled to `[0, 255]`.
pub fn magnitude_u8(image: &ComplexTensor) -> Result<GrayImage> {
    let (h, w) = single_plane(image)?;
    Ok(rescale(image.abs().data(), w, h))
}

/// Phase mapped linearly from `[-π, π]` to `[0, 255]`.
pub fn phase_u8(image: &ComplexTensor) -> Result<GrayImage> {
    let (h, w) = single_plane(image)?;
    let pixels = image
        .angle()
        .data()
        .iter()
        .map(|&p| ((p + std::f64::consts::PI) / std::f64::consts::TAU * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    Ok(GrayImage { width: w, height: h, pixels })
}

/// Foreground white, background black.
pub fn mask_u8(mask: &BinaryMask) -> GrayImage {
    GrayImage::from_mask(mask)
}

/// Input image | predicted image | predicted mask | mask difference |
/// input k-space | predicted k-space.
pub fn slice_panel(sample: &SliceSample, pred: &ComplexTensor, threshold_factor: f64) -> Result<GrayImage> {
    let pred_image = to_image(pred)?;
    let mask = binarize_with(&pred_image, threshold_factor)?;
    let diff = BinaryMask::from_bits(
        mask.shape().0,
        mask.shape().1,
        mask.bits().iter().zip(sample.brain_mask.bits()).map(|(a, b)| a != b).collect(),
    )?;
    GrayImage::hstack(
        &[
            magnitude_u8(&to_image(&sample.k_in)?)?,
            magnitude_u8(&pred_image)?,
            GrayImage::from_mask(&mask),
            GrayImage::from_mask(&diff),
            log_kspace_u8(&sample.k_in)?,
            log_kspace_u8(pred)?,
        ],
        2,
    )
}

/// PNG bytes with fixed encoder settings, so output is byte-stable.
pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        enc.set_filter(png::FilterType::NoFilter);
        let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        writer.write_image_data(&img.pixels).map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}

pub fn write_gray_png(img: &GrayImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_gray_png(img)?)?;
    Ok(())
}
