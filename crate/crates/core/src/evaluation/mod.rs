//! From predicted k-space to brain masks and segmentation scores.

mod metrics;
mod panels;
mod report;

pub use metrics::{
    confusion_metrics, dice, directed_hausdorff, squared_distance_transform, Confusion, Hausdorff,
};
pub use panels::{
    encode_gray_png, log_kspace_u8, magnitude_u8, mask_u8, phase_u8, slice_panel, write_gray_png, GrayImage};
pub use report::{per_slice_csv, summary_csv, SUMMARY_HEADER};

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctensor::{ifft2, ifftshift, ComplexTensor};
use crate::data::SliceSample;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::model::KStripModel;

pub const DEFAULT_THRESHOLD_FACTOR: f64 = 1.7;

/// Centred k-space to image domain.
pub fn to_image(k: &ComplexTensor) -> Result<ComplexTensor> {
    ifft2(&ifftshift(k)?)
}

/// `|img| > factor · mean |img|` over the whole slice.
pub fn binarize_with(image: &ComplexTensor, factor: f64) -> Result<BinaryMask> {
    let (planes, h, w) = image.spatial()?;
    if planes != 1 {
        return Err(Error::Dimension(format!("binarize expects one slice, got shape {:?}", image.shape())));
    }
    let mag = image.abs();
    let threshold = factor * mag.mean();
    BinaryMask::from_bits(h, w, mag.data().iter().map(|&m| m > threshold).collect())
}

pub fn binarize(image: &ComplexTensor) -> Result<BinaryMask> {
    binarize_with(image, DEFAULT_THRESHOLD_FACTOR)
}

/// Smallest brain area counted in aggregates: 5000 pixels at 256×256,
/// scaled with slice area.
pub fn min_brain_pixels(h: usize, w: usize) -> usize {
    5000 * h * w / (256 * 256)
}

/// Mean wrapped phase difference in radians over `mask`.
pub fn phase_error(pred: &ComplexTensor, target: &ComplexTensor, mask: &BinaryMask) -> Result<Option<f64>> {
    if pred.shape() != target.shape() || pred.len() != mask.bits().len() {
        return Err(Error::Dimension(format!(
            "phase error: {:?} vs {:?} vs mask {:?}",
            pred.shape(),
            target.shape(),
            mask.shape()
        )));
    }
    let (pa, ta) = (pred.angle(), target.angle());
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, _) in mask.bits().iter().enumerate().filter(|(_, &b)| b) {
        let d = (pa.data()[i] - ta.data()[i]).rem_euclid(TAU);
        sum += if d > PI { TAU - d } else { d };
        n += 1;
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// Anything that maps input k-space slices to predicted k-space.
pub trait Predictor: Sync {
    /// One `[1, H, W]` prediction per sample, in order.
    fn predict(&self, samples: &[&SliceSample]) -> Result<Vec<ComplexTensor>>;
}

impl Predictor for KStripModel {
    fn predict(&self, samples: &[&SliceSample]) -> Result<Vec<ComplexTensor>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let inputs: Vec<&ComplexTensor> = samples.iter().map(|s| &s.k_in).collect();
        let out = KStripModel::predict(self, &ComplexTensor::stack(&inputs)?)?;
        let (_, h, w) = out.spatial()?;
        (0..samples.len()).map(|i| out.select(i)?.reshape(&[1, h, w])).collect()
    }
}

/// Returns the ground-truth target k-space; isolates the evaluation
/// pipeline from the network.
#[derive(Debug, Clone, Copy, Default)]
pub struct TargetOracle;

impl Predictor for TargetOracle {
    fn predict(&self, samples: &[&SliceSample]) -> Result<Vec<ComplexTensor>> {
        Ok(samples.iter().map(|s| s.k_target.clone()).collect())
    }
}

/// Ground truth the predicted mask is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The phantom generator's brain mask.
    GeneratorMask,
    /// The target k-space passed through the same binarization.
    BinarizedTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub threshold_factor: f64,
    /// Defaults to [`min_brain_pixels`] for the slice size.
    pub min_brain_pixels: Option<usize>,
    pub reference: Reference,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            min_brain_pixels: None,
            reference: Reference::GeneratorMask,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceResult {
    pub patient_id: u32,
    pub slice_idx: u32,
    pub brain_pixels: usize,
    pub included: bool,
    pub dice: f64,
    /// `None` for an empty prediction.
    pub dhd: Option<f64>,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub failure: bool,
    /// Mean absolute phase error on true brain pixels, radians.
    pub phase_error: Option<f64>,
}

/// Aggregate over included slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub n_slices: usize,
    pub dice: f64,
    /// Mean over included slices with a non-empty prediction.
    pub dhd: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Included slices whose predicted mask is empty.
    pub failures: usize,
    pub phase_error: f64,
}

impl SegMetrics {
    pub fn from_slices(slices: &[SliceResult]) -> Self {
        let inc: Vec<&SliceResult> = slices.iter().filter(|s| s.included).collect();
        let mean = |f: &dyn Fn(&SliceResult) -> Option<f64>| {
            let v: Vec<f64> = inc.iter().filter_map(|s| f(s)).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        Self {
            n_slices: inc.len(),
            dice: mean(&|s| Some(s.dice)),
            dhd: mean(&|s| s.dhd),
            accuracy: mean(&|s| Some(s.accuracy)),
            sensitivity: mean(&|s| Some(s.sensitivity)),
            specificity: mean(&|s| Some(s.specificity)),
            failures: inc.iter().filter(|s| s.failure).count(),
            phase_error: mean(&|s| s.phase_error),
        }
    }
}

/// Score a single predicted slice.
pub fn score_slice(sample: &SliceSample, pred: &ComplexTensor, cfg: &EvalConfig, min_pixels: usize) -> Result<SliceResult> {
    let image = to_image(pred)?;
    let mask = binarize_with(&image, cfg.threshold_factor)?;
    let target_image = to_image(&sample.k_target)?;
    let truth = match cfg.reference {
        Reference::GeneratorMask => sample.brain_mask.clone(),
        Reference::BinarizedTarget => binarize_with(&target_image, cfg.threshold_factor)?,
    };
    let (accuracy, sensitivity, specificity) = confusion_metrics(&mask, &truth)?;
    let (dhd, failure) = if truth.is_empty() {
        (None, false)
    } else {
        match directed_hausdorff(&mask, &truth)? {
            Hausdorff::Distance(d) => (Some(d), false),
            Hausdorff::EmptyPrediction => (None, true),
        }
    };
    Ok(SliceResult {
        patient_id: sample.patient_id,
        slice_idx: sample.slice_idx,
        brain_pixels: sample.brain_pixels,
        included: sample.brain_pixels >= min_pixels,
        dice: dice(&mask, &truth)?,
        dhd,
        accuracy,
        sensitivity,
        specificity,
        failure,
        phase_error: phase_error(&image, &target_image, &sample.brain_mask)?,
    })
}

/// Per-slice results for `samples`, in order.
pub fn evaluate(predictor: &dyn Predictor, samples: &[&SliceSample], cfg: &EvalConfig) -> Result<Vec<SliceResult>> {
    if samples.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let (h, w) = samples[0].brain_mask.shape();
    let min_pixels = cfg.min_brain_pixels.unwrap_or_else(|| min_brain_pixels(h, w));
    let mut results = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(cfg.batch_size) {
        let preds = predictor.predict(chunk)?;
        if preds.len() != chunk.len() {
            return Err(Error::Contract(format!("predictor returned {} of {} slices", preds.len(), chunk.len())));
        }
        let scored: Vec<SliceResult> = chunk
            .par_iter()
            .zip(preds.par_iter())
            .map(|(s, p)| score_slice(s, p, cfg, min_pixels))
            .collect::<Result<_>>()?;
        results.extend(scored);
    }
    Ok(results)
}
