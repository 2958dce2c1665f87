//! Dense complex tensors stored as two real planes.
//!
//! Every payload in the pipeline (k-space, images, activations, weights)
//! is a [`ComplexTensor`]. Shapes are row-major with the spatial axes last.

mod fft;

pub use fft::{fft2, fftshift, ifft2, ifftshift};

use num_complex::Complex64;

use crate::error::{dim_err, Error, Result};

/// Real-valued dense tensor, used for magnitudes, phases and masks.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl RealTensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return dim_err(format!("shape {shape:?} needs {n} elements, got {}", data.len()));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Complex tensor with split real/imaginary storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), re: vec![0.0; n], im: vec![0.0; n] }
    }

    pub fn from_parts(shape: &[usize], re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if re.len() != n || im.len() != n {
            return dim_err(format!(
                "shape {shape:?} needs {n} elements, got re={} im={}",
                re.len(),
                im.len()
            ));
        }
        Ok(Self { shape: shape.to_vec(), re, im })
    }

    pub fn from_real(t: &RealTensor) -> Self {
        Self { shape: t.shape.clone(), re: t.data.clone(), im: vec![0.0; t.len()] }
    }

    pub fn from_complex(shape: &[usize], values: &[Complex64]) -> Result<Self> {
        let re = values.iter().map(|z| z.re).collect();
        let im = values.iter().map(|z| z.im).collect();
        Self::from_parts(shape, re, im)
    }

    pub fn scalar(z: Complex64) -> Self {
        Self { shape: vec![1], re: vec![z.re], im: vec![z.im] }
    }

    /// Build `r·e^{iφ}` element-wise from magnitude and phase planes.
    pub fn from_polar(magnitude: &RealTensor, phase: &RealTensor) -> Result<Self> {
        if magnitude.shape != phase.shape {
            return dim_err(format!(
                "from_polar: magnitude {:?} vs phase {:?}",
                magnitude.shape, phase.shape
            ));
        }
        let (re, im) = magnitude
            .data
            .iter()
            .zip(&phase.data)
            .map(|(&r, &p)| {
                let (s, c) = p.sin_cos();
                (r * c, r * s)
            })
            .unzip();
        Ok(Self { shape: magnitude.shape.clone(), re, im })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn re_mut(&mut self) -> &mut [f64] {
        &mut self.re
    }

    pub fn im_mut(&mut self) -> &mut [f64] {
        &mut self.im
    }

    /// Both planes mutably at once.
    pub fn planes_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.re, &mut self.im)
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        (self.shape, self.re, self.im)
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn set(&mut self, i: usize, z: Complex64) {
        self.re[i] = z.re;
        self.im[i] = z.im;
    }

    pub fn to_complex_vec(&self) -> Vec<Complex64> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex64::new(r, i)).collect()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.len() {
            return dim_err(format!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "{op}: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_same_shape(other, op)?;
        let mut out = Self::zeros(&self.shape);
        for i in 0..self.len() {
            out.set(i, f(self.get(i), other.get(i)));
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        let re = self.re.iter().zip(&other.re).map(|(a, b)| a + b).collect();
        let im = self.im.iter().zip(&other.im).map(|(a, b)| a + b).collect();
        Ok(Self { shape: self.shape.clone(), re, im })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        let re = self.re.iter().zip(&other.re).map(|(a, b)| a - b).collect();
        let im = self.im.iter().zip(&other.im).map(|(a, b)| a - b).collect();
        Ok(Self { shape: self.shape.clone(), re, im })
    }

    /// Element-wise complex product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        self.re.iter_mut().zip(&other.re).for_each(|(a, b)| *a += b);
        self.im.iter_mut().zip(&other.im).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            re: self.re.iter().map(|v| v * s).collect(),
            im: self.im.iter().map(|v| v * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        let mut out = Self::zeros(&self.shape);
        for i in 0..self.len() {
            out.set(i, self.get(i) * s);
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
        }
    }

    pub fn abs(&self) -> RealTensor {
        let data = self.re.iter().zip(&self.im).map(|(&r, &i)| r.hypot(i)).collect();
        RealTensor { shape: self.shape.clone(), data }
    }

    /// Phase in (−π, π].
    pub fn angle(&self) -> RealTensor {
        let data = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| {
                let a = i.atan2(r);
                // atan2 yields −π for (negative, −0.0); fold onto +π
                if a == -std::f64::consts::PI {
                    std::f64::consts::PI
                } else {
                    a
                }
            })
            .collect();
        RealTensor { shape: self.shape.clone(), data }
    }

    /// `ln(1 + |z|)`, the display scale for k-space.
    pub fn log1p_abs(&self) -> RealTensor {
        let mut t = self.abs();
        t.data.iter_mut().for_each(|v| *v = v.ln_1p());
        t
    }

    pub fn sum(&self) -> Complex64 {
        Complex64::new(self.re.iter().sum(), self.im.iter().sum())
    }

    pub fn mean(&self) -> Complex64 {
        if self.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        self.sum() / self.len() as f64
    }

    /// Σ|z|².
    pub fn energy(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok((0..self.len())
            .map(|i| (self.get(i) - other.get(i)).norm())
            .fold(0.0, f64::max))
    }

    /// Slice along the leading axis: element `index` of a batch.
    pub fn select(&self, index: usize) -> Result<Self> {
        let lead = *self.shape.first().ok_or_else(|| Error::Dimension("select on rank-0 tensor".into()))?;
        if index >= lead {
            return dim_err(format!("select index {index} out of range {lead}"));
        }
        let inner: usize = self.shape[1..].iter().product();
        let span = index * inner..(index + 1) * inner;
        Ok(Self {
            shape: self.shape[1..].to_vec(),
            re: self.re[span.clone()].to_vec(),
            im: self.im[span].to_vec(),
        })
    }

    /// Stack equally shaped tensors along a new leading axis.
    pub fn stack(items: &[&Self]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Dimension("stack of zero tensors".into()))?;
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        let mut re = Vec::with_capacity(first.len() * items.len());
        let mut im = Vec::with_capacity(first.len() * items.len());
        for t in items {
            first.check_same_shape(t, "stack")?;
            re.extend_from_slice(&t.re);
            im.extend_from_slice(&t.im);
        }
        Ok(Self { shape, re, im })
    }

    /// Trailing (H, W) and the number of leading 2D planes.
    pub(crate) fn spatial(&self) -> Result<(usize, usize, usize)> {
        let r = self.shape.len();
        if r < 2 {
            return dim_err(format!("need at least 2 dims, got {:?}", self.shape));
        }
        let (h, w) = (self.shape[r - 2], self.shape[r - 1]);
        Ok((self.len() / (h * w).max(1), h, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn single(r: f64, phi: f64) -> Complex64 {
        let m = RealTensor::new(&[1], vec![r]).unwrap();
        let p = RealTensor::new(&[1], vec![phi]).unwrap();
        ComplexTensor::from_polar(&m, &p).unwrap().get(0)
    }

    #[test]
    fn from_polar_examples() {
        let z = single(1.0, 0.0);
        assert_eq!((z.re, z.im), (1.0, 0.0));
        let z = single(2.0, PI / 2.0);
        assert!(z.re.abs() < 1e-15 && (z.im - 2.0).abs() < 1e-15);
        let z = single(1.5, PI);
        assert!((z.re + 1.5).abs() < 1e-15 && z.im.abs() < 1e-15);
    }

    #[test]
    fn from_polar_shape_mismatch() {
        let m = RealTensor::zeros(&[2, 2]);
        let p = RealTensor::zeros(&[4]);
        assert!(matches!(ComplexTensor::from_polar(&m, &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn elementwise_examples() {
        let a = ComplexTensor::scalar(Complex64::new(1.0, 1.0));
        let b = ComplexTensor::scalar(Complex64::new(2.0, 3.0));
        assert_eq!(a.mul(&b).unwrap().get(0), Complex64::new(-1.0, 5.0));
        assert_eq!(ComplexTensor::scalar(Complex64::new(3.0, 4.0)).abs().data(), &[5.0]);
        let ang = ComplexTensor::scalar(Complex64::new(0.0, 2.0)).angle();
        assert!((ang.data()[0] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn angle_range_is_half_open() {
        let t = ComplexTensor::from_parts(&[2], vec![-1.0, -1.0], vec![0.0, -0.0]).unwrap();
        assert_eq!(t.angle().data(), &[PI, PI]);
    }

    #[test]
    fn binary_ops_reject_mismatched_shapes() {
        let a = ComplexTensor::zeros(&[2, 3]);
        let b = ComplexTensor::zeros(&[3, 2]);
        assert!(a.add(&b).is_err());
        assert!(a.sub(&b).is_err());
        assert!(a.mul(&b).is_err());
    }

    #[test]
    fn reductions() {
        let t = ComplexTensor::from_parts(&[2, 2], vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.sum(), Complex64::new(10.0, 2.0));
        assert_eq!(t.mean(), Complex64::new(2.5, 0.5));
        assert_eq!(t.conj().im(), &[0.0, -1.0, 0.0, -1.0]);
        assert!((t.log1p_abs().data()[0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn select_and_stack_are_inverse() {
        let a = ComplexTensor::from_parts(&[1, 2], vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let b = ComplexTensor::from_parts(&[1, 2], vec![5.0, 6.0], vec![7.0, 8.0]).unwrap();
        let s = ComplexTensor::stack(&[&a, &b]).unwrap();
        assert_eq!(s.shape(), &[2, 1, 2]);
        assert_eq!(s.select(1).unwrap(), b);
        assert!(s.select(2).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn polar_roundtrip(re in -50.0f64..50.0, im in -50.0f64..50.0) {
                let z = ComplexTensor::scalar(Complex64::new(re, im));
                let mut phase = z.angle();
                phase.data_mut().iter_mut().for_each(|p| *p = p.rem_euclid(2.0 * PI));
                let back = ComplexTensor::from_polar(&z.abs(), &phase).unwrap();
                prop_assert!(back.max_abs_diff(&z).unwrap() < 1e-12);
            }
        }
    }
}
