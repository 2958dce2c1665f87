//! Synthetic head phantoms: skull ring, cerebrospinal-fluid gap, textured
//! brain ellipse with an optional bright lesion, and a smooth phase field.
//!
//! Geometry lives in normalised coordinates `[-1, 1]²`. Each patient draws
//! one anatomy; slices traverse the head from one end to the other, so both
//! end slices carry only a small brain cross-section.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctensor::{fft2, fftshift, ComplexTensor, RealTensor};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn sample(self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    fn check(self, name: &str, within: Option<(f64, f64)>) -> Result<()> {
        let ok = self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi;
        let inside = within.is_none_or(|(a, b)| self.lo >= a && self.hi <= b);
        if ok && inside {
            Ok(())
        } else {
            Err(Error::Config(format!("{name}: invalid range [{}, {}]", self.lo, self.hi)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub size: (usize, usize),
    pub seed: u64,
    /// Outer head semi-axes at the central slice.
    pub head_axis: Span,
    /// Aspect ratio of the head ellipse (vertical / horizontal).
    pub head_aspect: Span,
    pub max_rotation: f64,
    pub max_offset: f64,
    pub skull_thickness: Span,
    pub skull_intensity: Span,
    /// Width of the low-signal gap between skull and brain.
    pub csf_gap: Span,
    pub csf_intensity: Span,
    pub brain_intensity: Span,
    pub texture_blobs: usize,
    pub texture_amplitude: f64,
    pub texture_width: Span,
    pub lesion_probability: f64,
    pub lesion_intensity: Span,
    pub lesion_radius: Span,
    /// Range of each polynomial phase coefficient.
    pub phase_coefficient: f64,
    /// Head scale at the outermost slices, relative to the central slice.
    pub end_scale: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            size: (64, 64),
            seed: 0,
            head_axis: Span::new(0.76, 0.86),
            head_aspect: Span::new(1.0, 1.12),
            max_rotation: 0.2,
            max_offset: 0.03,
            skull_thickness: Span::new(0.08, 0.12),
            skull_intensity: Span::new(0.85, 1.0),
            csf_gap: Span::new(0.08, 0.11),
            csf_intensity: Span::new(0.05, 0.15),
            brain_intensity: Span::new(0.6, 0.72),
            texture_blobs: 4,
            texture_amplitude: 0.06,
            texture_width: Span::new(0.1, 0.2),
            lesion_probability: 0.3,
            lesion_intensity: Span::new(0.8, 0.9),
            lesion_radius: Span::new(0.06, 0.12),
            phase_coefficient: 1.0,
            end_scale: 0.4,
        }
    }
}

impl PhantomSpec {
    pub fn with_size(size: usize, seed: u64) -> Self {
        Self { size: (size, size), seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.size;
        if h < 8 || w < 8 || !h.is_power_of_two() || !w.is_power_of_two() {
            return Err(Error::Config(format!("phantom size {h}x{w} must be powers of two ≥ 8")));
        }
        let unit = Some((0.0, 1.0));
        self.head_axis.check("head_axis", Some((0.1, 1.0)))?;
        self.head_aspect.check("head_aspect", Some((0.5, 2.0)))?;
        self.skull_thickness.check("skull_thickness", Some((0.0, 0.5)))?;
        self.skull_intensity.check("skull_intensity", unit)?;
        self.csf_gap.check("csf_gap", Some((0.0, 0.5)))?;
        self.csf_intensity.check("csf_intensity", unit)?;
        self.brain_intensity.check("brain_intensity", unit)?;
        self.texture_width.check("texture_width", Some((1e-3, 2.0)))?;
        self.lesion_intensity.check("lesion_intensity", unit)?;
        self.lesion_radius.check("lesion_radius", Some((0.0, 0.5)))?;
        let unit_scalar = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit_scalar("lesion_probability", self.lesion_probability)?;
        unit_scalar("end_scale", self.end_scale)?;
        unit_scalar("max_offset", self.max_offset)?;
        if self.brain_intensity.lo - self.texture_amplitude < 0.0 || self.brain_intensity.hi + self.texture_amplitude > 1.0 {
            return Err(Error::Config("texture pushes brain intensity outside [0, 1]".into()));
        }
        // the brain must keep positive extent at the central slice
        let min_inner = self.head_axis.lo - self.skull_thickness.hi - self.csf_gap.hi;
        if min_inner <= 0.05 {
            return Err(Error::Config("skull and gap leave no room for the brain".into()));
        }
        Ok(())
    }
}

/// Image-domain ground truth of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSlice {
    /// Complex head image `[H, W]`.
    pub head: ComplexTensor,
    pub magnitude: RealTensor,
    /// Phase field in `[0, 2π]`, defined on every pixel.
    pub phase: RealTensor,
    pub brain_mask: BinaryMask,
    pub skull_mask: BinaryMask,
}

/// One training/evaluation example in centred k-space.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSample {
    /// Head k-space `[1, H, W]`.
    pub k_in: ComplexTensor,
    /// Brain-only k-space `[1, H, W]`.
    pub k_target: ComplexTensor,
    pub brain_mask: BinaryMask,
    pub patient_id: u32,
    pub slice_idx: u32,
    pub brain_pixels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn level(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = self.cos * dx + self.sin * dy;
        let v = -self.sin * dx + self.cos * dy;
        (u / self.a).powi(2) + (v / self.b).powi(2)
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.level(x, y) <= 1.0
    }

    fn shrink(&self, by: f64) -> Self {
        Self { a: self.a - by, b: self.b - by, ..*self }
    }
}

struct Blob {
    x: f64,
    y: f64,
    width: f64,
    amplitude: f64,
}

/// Per-patient anatomy, fixed across slices.
struct Anatomy {
    head_axis: f64,
    aspect: f64,
    rotation: f64,
    offset: (f64, f64),
    thickness: f64,
    skull: f64,
    gap: f64,
    csf: f64,
    brain: f64,
    blobs: Vec<Blob>,
    lesion: Option<(f64, f64, f64, f64)>,
    phase: [f64; 8],
}

impl Anatomy {
    fn draw(spec: &PhantomSpec, rng: &mut impl Rng) -> Self {
        let mut sym = |m: f64| if m == 0.0 { 0.0 } else { rng.gen_range(-m..=m) };
        let rotation = sym(spec.max_rotation);
        let offset = (sym(spec.max_offset), sym(spec.max_offset));
        let pc = spec.phase_coefficient;
        let mut phase = [0.0; 8];
        for c in &mut phase {
            *c = sym(pc);
        }
        let blobs = (0..spec.texture_blobs)
            .map(|_| Blob {
                x: rng.gen_range(-0.5..=0.5),
                y: rng.gen_range(-0.5..=0.5),
                width: spec.texture_width.sample(rng),
                amplitude: if spec.texture_amplitude > 0.0 {
                    rng.gen_range(-spec.texture_amplitude..=spec.texture_amplitude)
                } else {
                    0.0
                },
            })
            .collect();
        let lesion = rng.gen_bool(spec.lesion_probability).then(|| {
            let (x, y) = (rng.gen_range(-0.4..=0.4), rng.gen_range(-0.4..=0.4));
            (x, y, spec.lesion_radius.sample(rng), spec.lesion_intensity.sample(rng))
        });
        Self {
            head_axis: spec.head_axis.sample(rng),
            aspect: spec.head_aspect.sample(rng),
            rotation,
            offset,
            thickness: spec.skull_thickness.sample(rng),
            skull: spec.skull_intensity.sample(rng),
            gap: spec.csf_gap.sample(rng),
            csf: spec.csf_intensity.sample(rng),
            brain: spec.brain_intensity.sample(rng),
            blobs,
            lesion,
            phase,
        }
    }
}

/// Position of a slice along the traversal, in `[-1, 1]`.
fn traversal(slice: usize, n_slices: usize) -> f64 {
    if n_slices <= 1 {
        0.0
    } else {
        2.0 * slice as f64 / (n_slices - 1) as f64 - 1.0
    }
}

fn patient_rng(seed: u64, patient_id: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(patient_id as u64);
    rng
}

fn render(spec: &PhantomSpec, anat: &Anatomy, z: f64) -> Result<PhantomSlice> {
    let (h, w) = spec.size;
    let scale = (1.0 - (1.0 - spec.end_scale * spec.end_scale) * z * z).sqrt();
    let (cos, sin) = (anat.rotation.cos(), anat.rotation.sin());
    let a = anat.head_axis * scale;
    let outer = Ellipse { cx: anat.offset.0, cy: anat.offset.1, a, b: a * anat.aspect, cos, sin };
    let inner = outer.shrink(anat.thickness);
    let brain = inner.shrink(anat.gap);

    let mut magnitude = vec![0.0; h * w];
    let mut phase = vec![0.0; h * w];
    let mut brain_bits = vec![false; h * w];
    let mut skull_bits = vec![false; h * w];
    for iy in 0..h {
        let y = 2.0 * (iy as f64 + 0.5) / h as f64 - 1.0;
        for ix in 0..w {
            let x = 2.0 * (ix as f64 + 0.5) / w as f64 - 1.0;
            let i = iy * w + ix;
            let p = &anat.phase;
            phase[i] = p[0] * x + p[1] * y + p[2] * x * x + p[3] * x * y + p[4] * y * y + z * (p[5] * x + p[6] * y + p[7]);
            if !outer.contains(x, y) {
                continue;
            }
            if !inner.contains(x, y) {
                skull_bits[i] = true;
                magnitude[i] = anat.skull;
            } else if brain.a > 0.0 && brain.b > 0.0 && brain.contains(x, y) {
                brain_bits[i] = true;
                // texture coordinates follow the brain as it shrinks
                let (u, v) = ((x - brain.cx) / scale, (y - brain.cy) / scale);
                let mut val = anat.brain;
                for blob in &anat.blobs {
                    let d2 = (u - blob.x).powi(2) + (v - blob.y).powi(2);
                    val += blob.amplitude * (-d2 / (2.0 * blob.width * blob.width)).exp();
                }
                if let Some((lx, ly, r, li)) = anat.lesion {
                    if (u - lx).powi(2) + (v - ly).powi(2) <= r * r {
                        val = li;
                    }
                }
                magnitude[i] = val.clamp(0.0, 1.0);
            } else {
                magnitude[i] = anat.csf;
            }
        }
    }
    let (lo, hi) = phase.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    for v in &mut phase {
        *v = if span > 0.0 { (*v - lo) / span * TAU } else { PI };
    }
    let magnitude = RealTensor::new(&[h, w], magnitude)?;
    let phase = RealTensor::new(&[h, w], phase)?;
    let head = ComplexTensor::from_polar(&magnitude, &phase)?;
    Ok(PhantomSlice {
        head,
        magnitude,
        phase,
        brain_mask: BinaryMask::from_bits(h, w, brain_bits)?,
        skull_mask: BinaryMask::from_bits(h, w, skull_bits)?,
    })
}

/// Image-domain slices of one patient.
pub fn gen_patient_images(spec: &PhantomSpec, patient_id: u32, n_slices: usize) -> Result<Vec<PhantomSlice>> {
    spec.validate()?;
    if n_slices == 0 {
        return Err(Error::Config("n_slices must be at least 1".into()));
    }
    let mut rng = patient_rng(spec.seed, patient_id);
    let anat = Anatomy::draw(spec, &mut rng);
    (0..n_slices).map(|s| render(spec, &anat, traversal(s, n_slices))).collect()
}

/// Brain-only image: the head image zeroed outside the brain mask.
pub fn masked_image(head: &ComplexTensor, mask: &BinaryMask) -> ComplexTensor {
    let mut out = head.clone();
    let (re, im) = out.planes_mut();
    for (i, &b) in mask.bits().iter().enumerate() {
        if !b {
            re[i] = 0.0;
            im[i] = 0.0;
        }
    }
    out
}

impl PhantomSlice {
    pub fn to_sample(&self, patient_id: u32, slice_idx: u32) -> Result<SliceSample> {
        let (h, w) = self.brain_mask.shape();
        let brain = masked_image(&self.head, &self.brain_mask);
        let k_in = fftshift(&fft2(&self.head)?)?.reshape(&[1, h, w])?;
        let k_target = fftshift(&fft2(&brain)?)?.reshape(&[1, h, w])?;
        Ok(SliceSample {
            k_in,
            k_target,
            brain_pixels: self.brain_mask.count(),
            brain_mask: self.brain_mask.clone(),
            patient_id,
            slice_idx,
        })
    }
}

/// All slices of one patient as k-space samples; deterministic in
/// `(spec.seed, patient_id)`.
pub fn gen_patient(spec: &PhantomSpec, patient_id: u32, n_slices: usize) -> Result<Vec<SliceSample>> {
    gen_patient_images(spec, patient_id, n_slices)?
        .iter()
        .enumerate()
        .map(|(s, img)| img.to_sample(patient_id, s as u32))
        .collect()
}
