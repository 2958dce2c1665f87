//! Complex convolution `W ∗ d = (X∗a − Y∗b) + i(X∗b + Y∗a)`.
//!
//! The four real convolutions are evaluated as one real convolution with
//! `2·Cin` inputs and `2·Cout` outputs, lowered to im2col + GEMM with the
//! block weight matrix `[[X, −Y], [Y, X]]`.

use rand::Rng;
use rayon::prelude::*;

use super::params::{Forward, ParamId, ParamKind, ParamStore};
use crate::autograd::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Result};

/// `c = a·b (+ beta·c)` for row-major slices with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above bound every index touched by the kernel
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    k: usize,
}

impl Geometry {
    fn pad(&self) -> usize {
        self.k / 2
    }
    fn hw(&self) -> usize {
        self.h * self.w
    }
    /// Rows of the im2col matrix.
    fn col_rows(&self) -> usize {
        2 * self.cin * self.k * self.k
    }
}

/// im2col of one sample; `re`, `im` are `[cin, h, w]`.
fn im2col(g: &Geometry, re: &[f64], im: &[f64], cols: &mut [f64]) {
    let (h, w, k, pad, hw) = (g.h, g.w, g.k, g.pad() as isize, g.hw());
    let mut row = 0;
    for plane in [re, im] {
        for c in 0..g.cin {
            let src = &plane[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let dst = &mut cols[row * hw..(row + 1) * hw];
                    let dx = kx as isize - pad;
                    for y in 0..h {
                        let sy = y as isize + ky as isize - pad;
                        let out = &mut dst[y * w..(y + 1) * w];
                        if sy < 0 || sy >= h as isize {
                            out.fill(0.0);
                            continue;
                        }
                        let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                        // valid x range: 0 <= x + dx < w
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                        out[..x0.min(w)].fill(0.0);
                        if x1 > x0 {
                            let s0 = (x0 as isize + dx) as usize;
                            out[x0..x1].copy_from_slice(&srow[s0..s0 + (x1 - x0)]);
                        }
                        out[x1.max(x0).min(w)..].fill(0.0);
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into `[cin, h, w]` planes.
fn col2im(g: &Geometry, cols: &[f64], re: &mut [f64], im: &mut [f64]) {
    let (h, w, k, pad, hw) = (g.h, g.w, g.k, g.pad() as isize, g.hw());
    let mut row = 0;
    for plane in [re, im] {
        for c in 0..g.cin {
            let dst = &mut plane[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let src = &cols[row * hw..(row + 1) * hw];
                    let dx = kx as isize - pad;
                    for y in 0..h {
                        let sy = y as isize + ky as isize - pad;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                        if x1 <= x0 {
                            continue;
                        }
                        let drow = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                        let s0 = (x0 as isize + dx) as usize;
                        for (d, s) in drow[s0..s0 + (x1 - x0)].iter_mut().zip(&src[y * w + x0..y * w + x1]) {
                            *d += s;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Real block matrix `[[X, −Y], [Y, X]]` of shape `[2·cout, 2·cin·k²]`.
fn block_weights(g: &Geometry, wt: &ComplexTensor) -> Vec<f64> {
    let kk = g.k * g.k;
    let cols = g.col_rows();
    let half = g.cin * kk;
    let mut m = vec![0.0; 2 * g.cout * cols];
    for o in 0..g.cout {
        let src = o * half..(o + 1) * half;
        let (x, y) = (&wt.re()[src.clone()], &wt.im()[src]);
        let top = o * cols;
        let bottom = (g.cout + o) * cols;
        for j in 0..half {
            m[top + j] = x[j];
            m[top + half + j] = -y[j];
            m[bottom + j] = y[j];
            m[bottom + half + j] = x[j];
        }
    }
    m
}

/// Raw complex 2D convolution (cross-correlation), stride 1, zero padding `k/2`.
///
/// `x: [B, Cin, H, W]`, `weight: [Cout, Cin, k, k]`, `bias: [Cout]`.
pub fn conv2d(tape: &Tape, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
    let xv = tape.value(x);
    let wv = tape.value(weight);
    let (xs, ws) = (xv.shape(), wv.shape());
    if xs.len() != 4 || ws.len() != 4 {
        return dim_err(format!("conv2d expects rank-4 input and weight, got {xs:?} and {ws:?}"));
    }
    if xs[1] != ws[1] {
        return dim_err(format!("conv2d channel mismatch: input has {}, kernel expects {}", xs[1], ws[1]));
    }
    if ws[2] != ws[3] || ws[2] % 2 == 0 {
        return dim_err(format!("conv2d needs an odd square kernel, got {ws:?}"));
    }
    let g = Geometry { cin: xs[1], cout: ws[0], h: xs[2], w: xs[3], k: ws[2] };
    let batch = xs[0];
    let bv = match bias {
        Some(b) => {
            let bv = tape.value(b);
            if bv.shape() != [g.cout] {
                return dim_err(format!("bias shape {:?}, expected [{}]", bv.shape(), g.cout));
            }
            Some(bv)
        }
        None => None,
    };

    let kmat = block_weights(&g, &wv);
    let (hw, in_span, out_span) = (g.hw(), g.cin * g.hw(), g.cout * g.hw());
    let rows = g.col_rows();

    let xref: &ComplexTensor = &xv;
    let per_sample: Vec<Vec<f64>> = (0..batch)
        .into_par_iter()
        .map(|b| {
            let mut cols = vec![0.0; rows * hw];
            let span = b * in_span..(b + 1) * in_span;
            im2col(&g, &xref.re()[span.clone()], &xref.im()[span], &mut cols);
            let mut out = vec![0.0; 2 * out_span];
            gemm(2 * g.cout, rows, hw, &kmat, (rows, 1), &cols, (hw, 1), 0.0, &mut out);
            out
        })
        .collect();

    let mut out = ComplexTensor::zeros(&[batch, g.cout, g.h, g.w]);
    {
        let (ore, oim) = out.planes_mut();
        for (b, o) in per_sample.iter().enumerate() {
            ore[b * out_span..(b + 1) * out_span].copy_from_slice(&o[..out_span]);
            oim[b * out_span..(b + 1) * out_span].copy_from_slice(&o[out_span..]);
        }
        if let Some(bv) = &bv {
            for b in 0..batch {
                for o in 0..g.cout {
                    let span = b * out_span + o * hw..b * out_span + (o + 1) * hw;
                    ore[span.clone()].iter_mut().for_each(|v| *v += bv.re()[o]);
                    oim[span].iter_mut().for_each(|v| *v += bv.im()[o]);
                }
            }
        }
    }

    let mut parents = vec![x, weight];
    parents.extend(bias);
    let has_bias = bias.is_some();
    let wshape = ws.to_vec();
    Ok(tape.push(
        out,
        &parents,
        Box::new(move |grad, need| {
            let (need_x, need_w) = (need[0], need[1]);
            let need_b = has_bias && need[2];
            let xref: &ComplexTensor = &xv;

            // per sample: (dK partial, dx re, dx im)
            let parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..batch)
                .into_par_iter()
                .map(|b| {
                    let mut dout = vec![0.0; 2 * out_span];
                    dout[..out_span].copy_from_slice(&grad.re()[b * out_span..(b + 1) * out_span]);
                    dout[out_span..].copy_from_slice(&grad.im()[b * out_span..(b + 1) * out_span]);
                    let mut dk = Vec::new();
                    if need_w {
                        let mut cols = vec![0.0; rows * hw];
                        let span = b * in_span..(b + 1) * in_span;
                        im2col(&g, &xref.re()[span.clone()], &xref.im()[span], &mut cols);
                        dk = vec![0.0; 2 * g.cout * rows];
                        // dK = dOut · colsᵀ
                        gemm(2 * g.cout, hw, rows, &dout, (hw, 1), &cols, (1, hw), 0.0, &mut dk);
                    }
                    let (mut dre, mut dim) = (Vec::new(), Vec::new());
                    if need_x {
                        let mut dcols = vec![0.0; rows * hw];
                        // dcols = Kᵀ · dOut
                        gemm(rows, 2 * g.cout, hw, &kmat, (1, rows), &dout, (hw, 1), 0.0, &mut dcols);
                        dre = vec![0.0; in_span];
                        dim = vec![0.0; in_span];
                        col2im(&g, &dcols, &mut dre, &mut dim);
                    }
                    (dk, dre, dim)
                })
                .collect();

            let gx = need_x.then(|| {
                let mut t = ComplexTensor::zeros(&[batch, g.cin, g.h, g.w]);
                let (re, im) = t.planes_mut();
                for (b, (_, dre, dim)) in parts.iter().enumerate() {
                    re[b * in_span..(b + 1) * in_span].copy_from_slice(dre);
                    im[b * in_span..(b + 1) * in_span].copy_from_slice(dim);
                }
                t
            });

            let gw = need_w.then(|| {
                let mut dk = vec![0.0; 2 * g.cout * rows];
                for (part, _, _) in &parts {
                    dk.iter_mut().zip(part).for_each(|(a, b)| *a += b);
                }
                let half = g.cin * g.k * g.k;
                let mut t = ComplexTensor::zeros(&wshape);
                let (re, im) = t.planes_mut();
                for o in 0..g.cout {
                    let top = o * rows;
                    let bottom = (g.cout + o) * rows;
                    for j in 0..half {
                        re[o * half + j] = dk[top + j] + dk[bottom + half + j];
                        im[o * half + j] = dk[bottom + j] - dk[top + half + j];
                    }
                }
                t
            });

            let gb = need_b.then(|| {
                let mut t = ComplexTensor::zeros(&[g.cout]);
                let (re, im) = t.planes_mut();
                for b in 0..batch {
                    for o in 0..g.cout {
                        let span = b * out_span + o * hw..b * out_span + (o + 1) * hw;
                        re[o] += grad.re()[span.clone()].iter().sum::<f64>();
                        im[o] += grad.im()[span].iter().sum::<f64>();
                    }
                }
                t
            });

            let mut v = vec![gx, gw];
            if has_bias {
                v.push(gb);
            }
            v
        }),
    ))
}

/// Uniform initialisation bound for each of the real and imaginary kernels.
pub fn init_bound(cin: usize, k: usize) -> f64 {
    (1.0 / (cin * k * k * 2) as f64).sqrt()
}

/// Complex convolution layer with learnable `W = X + iY` and complex bias.
#[derive(Debug, Clone)]
pub struct ComplexConv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl ComplexConv2d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let bound = init_bound(in_channels, kernel);
        let n = out_channels * in_channels * kernel * kernel;
        let re = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        let im = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        let w = ComplexTensor::from_parts(&[out_channels, in_channels, kernel, kernel], re, im)?;
        let weight = store.register(format!("{name}.weight"), ParamKind::Trainable, w)?;
        let bias = store.register(format!("{name}.bias"), ParamKind::Trainable, ComplexTensor::zeros(&[out_channels]))?;
        Ok(Self { weight, bias, in_channels, out_channels, kernel })
    }

    pub fn forward(&self, fwd: &Forward<'_>, x: Var) -> Result<Var> {
        conv2d(fwd.tape, x, fwd.param(self.weight), Some(fwd.param(self.bias)))
    }
}
