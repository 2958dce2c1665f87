//! Radix-2 iterative 2D FFT over the two trailing axes.
//!
//! Forward transform is unnormalized, the inverse carries the `1/(H·W)`
//! factor so that `ifft2(fft2(x)) == x`.

use std::f64::consts::PI;

use super::ComplexTensor;
use crate::error::{Error, Result};

struct Radix2 {
    n: usize,
    log2: u32,
    // cos/sin of 2πk/n for k < n/2
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        let half = n / 2;
        let (cos, sin) = (0..half)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Self { n, log2: n.trailing_zeros(), cos, sin }
    }

    /// In-place transform of one strided line. `inverse` flips the twiddle sign.
    fn run(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        if n <= 1 {
            return;
        }
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - self.log2);
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let wr = self.cos[k * stride];
                    let wi = sign * self.sin[k * stride];
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }
}

fn check_pow2(h: usize, w: usize) -> Result<()> {
    if !h.is_power_of_two() || !w.is_power_of_two() {
        return Err(Error::UnsupportedSize(format!(
            "fft2 needs power-of-two spatial dims, got {h}x{w}"
        )));
    }
    Ok(())
}

fn transform(t: &ComplexTensor, inverse: bool) -> Result<ComplexTensor> {
    let (planes, h, w) = t.spatial()?;
    check_pow2(h, w)?;
    let mut out = t.clone();
    let rows = Radix2::new(w);
    let cols = Radix2::new(h);
    let (re, im) = out.planes_mut();
    let mut col_re = vec![0.0; h];
    let mut col_im = vec![0.0; h];
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..h {
            let span = base + y * w..base + (y + 1) * w;
            rows.run(&mut re[span.clone()], &mut im[span], inverse);
        }
        for x in 0..w {
            for y in 0..h {
                col_re[y] = re[base + y * w + x];
                col_im[y] = im[base + y * w + x];
            }
            cols.run(&mut col_re, &mut col_im, inverse);
            for y in 0..h {
                re[base + y * w + x] = col_re[y];
                im[base + y * w + x] = col_im[y];
            }
        }
    }
    if inverse {
        let norm = 1.0 / (h * w) as f64;
        re.iter_mut().chain(im.iter_mut()).for_each(|v| *v *= norm);
    }
    Ok(out)
}

/// Forward 2D DFT of every trailing H×W plane.
pub fn fft2(t: &ComplexTensor) -> Result<ComplexTensor> {
    transform(t, false)
}

/// Inverse 2D DFT (scaled by `1/(H·W)`).
pub fn ifft2(t: &ComplexTensor) -> Result<ComplexTensor> {
    transform(t, true)
}

fn roll(t: &ComplexTensor, dy: usize, dx: usize) -> Result<ComplexTensor> {
    let (planes, h, w) = t.spatial()?;
    let mut out = ComplexTensor::zeros(t.shape());
    let (ore, oim) = out.planes_mut();
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..h {
            let ty = (y + dy) % h;
            for x in 0..w {
                let tx = (x + dx) % w;
                ore[base + ty * w + tx] = t.re()[base + y * w + x];
                oim[base + ty * w + tx] = t.im()[base + y * w + x];
            }
        }
    }
    Ok(out)
}

/// Move the DC bin to `(H/2, W/2)`.
pub fn fftshift(t: &ComplexTensor) -> Result<ComplexTensor> {
    let (_, h, w) = t.spatial()?;
    roll(t, h / 2, w / 2)
}

/// Inverse of [`fftshift`], also for odd sizes.
pub fn ifftshift(t: &ComplexTensor) -> Result<ComplexTensor> {
    let (_, h, w) = t.spatial()?;
    roll(t, h - h / 2, w - w / 2)
}
