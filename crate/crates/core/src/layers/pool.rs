//! Resolution changes in centred k-space: spectral pooling crops the
//! periphery, nearest-neighbour upsampling grows the grid back.

use super::conv::ComplexConv2d;
use super::params::Forward;
use crate::autograd::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Result};

fn rank4(t: &ComplexTensor, op: &str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => dim_err(format!("{op} expects [B, C, H, W], got {:?}", t.shape())),
    }
}

/// Keep the central `H/2 × W/2` block, rows `[H/4, 3H/4)` and columns `[W/4, 3W/4)`.
///
/// The input must be centred k-space (DC at `(H/2, W/2)`); the DC bin lands on
/// the centre of the output.
pub fn spectral_pool(tape: &Tape, x: Var) -> Result<Var> {
    let xv = tape.value(x);
    let (b, c, h, w) = rank4(&xv, "spectral_pool")?;
    if h % 2 != 0 || w % 2 != 0 {
        return dim_err(format!("spectral_pool needs even spatial dims, got {h}x{w}"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let (y0, x0) = (h / 4, w / 4);
    let planes = b * c;
    let mut out = ComplexTensor::zeros(&[b, c, oh, ow]);
    {
        let (ore, oim) = out.planes_mut();
        for p in 0..planes {
            for y in 0..oh {
                let src = p * h * w + (y0 + y) * w + x0;
                let dst = p * oh * ow + y * ow;
                ore[dst..dst + ow].copy_from_slice(&xv.re()[src..src + ow]);
                oim[dst..dst + ow].copy_from_slice(&xv.im()[src..src + ow]);
            }
        }
    }
    Ok(tape.push(
        out,
        &[x],
        Box::new(move |g, _| {
            let mut gx = ComplexTensor::zeros(&[b, c, h, w]);
            let (re, im) = gx.planes_mut();
            for p in 0..planes {
                for y in 0..oh {
                    let dst = p * h * w + (y0 + y) * w + x0;
                    let src = p * oh * ow + y * ow;
                    re[dst..dst + ow].copy_from_slice(&g.re()[src..src + ow]);
                    im[dst..dst + ow].copy_from_slice(&g.im()[src..src + ow]);
                }
            }
            vec![Some(gx)]
        }),
    ))
}

/// 2× nearest-neighbour replication of both planes.
pub fn upsample_nearest(tape: &Tape, x: Var) -> Result<Var> {
    let xv = tape.value(x);
    let (b, c, h, w) = rank4(&xv, "upsample")?;
    let (oh, ow) = (2 * h, 2 * w);
    let planes = b * c;
    let mut out = ComplexTensor::zeros(&[b, c, oh, ow]);
    {
        let (ore, oim) = out.planes_mut();
        for p in 0..planes {
            for y in 0..oh {
                for xx in 0..ow {
                    let s = p * h * w + (y / 2) * w + xx / 2;
                    let d = p * oh * ow + y * ow + xx;
                    ore[d] = xv.re()[s];
                    oim[d] = xv.im()[s];
                }
            }
        }
    }
    Ok(tape.push(
        out,
        &[x],
        Box::new(move |g, _| {
            let mut gx = ComplexTensor::zeros(&[b, c, h, w]);
            let (re, im) = gx.planes_mut();
            for p in 0..planes {
                for y in 0..oh {
                    for xx in 0..ow {
                        let s = p * oh * ow + y * ow + xx;
                        let d = p * h * w + (y / 2) * w + xx / 2;
                        re[d] += g.re()[s];
                        im[d] += g.im()[s];
                    }
                }
            }
            vec![Some(gx)]
        }),
    ))
}

/// Concatenate `[B, C1, H, W]` and `[B, C2, H, W]` along the channel axis.
pub fn concat_channels(tape: &Tape, a: Var, b: Var) -> Result<Var> {
    let (av, bv) = (tape.value(a), tape.value(b));
    let (n, ca, h, w) = rank4(&av, "concat")?;
    let (nb, cb, hb, wb) = rank4(&bv, "concat")?;
    if (n, h, w) != (nb, hb, wb) {
        return dim_err(format!("concat: {:?} vs {:?}", av.shape(), bv.shape()));
    }
    let (sa, sb) = (ca * h * w, cb * h * w);
    let mut out = ComplexTensor::zeros(&[n, ca + cb, h, w]);
    {
        let (re, im) = out.planes_mut();
        for i in 0..n {
            let base = i * (sa + sb);
            re[base..base + sa].copy_from_slice(&av.re()[i * sa..(i + 1) * sa]);
            im[base..base + sa].copy_from_slice(&av.im()[i * sa..(i + 1) * sa]);
            re[base + sa..base + sa + sb].copy_from_slice(&bv.re()[i * sb..(i + 1) * sb]);
            im[base + sa..base + sa + sb].copy_from_slice(&bv.im()[i * sb..(i + 1) * sb]);
        }
    }
    Ok(tape.push(
        out,
        &[a, b],
        Box::new(move |g, _| {
            let mut ga = ComplexTensor::zeros(&[n, ca, h, w]);
            let mut gb = ComplexTensor::zeros(&[n, cb, h, w]);
            for i in 0..n {
                let base = i * (sa + sb);
                ga.re_mut()[i * sa..(i + 1) * sa].copy_from_slice(&g.re()[base..base + sa]);
                ga.im_mut()[i * sa..(i + 1) * sa].copy_from_slice(&g.im()[base..base + sa]);
                gb.re_mut()[i * sb..(i + 1) * sb].copy_from_slice(&g.re()[base + sa..base + sa + sb]);
                gb.im_mut()[i * sb..(i + 1) * sb].copy_from_slice(&g.im()[base + sa..base + sa + sb]);
            }
            vec![Some(ga), Some(gb)]
        }),
    ))
}

/// Nearest-neighbour 2× upsampling followed by a complex convolution.
#[derive(Debug, Clone)]
pub struct UpsampleConv {
    pub conv: ComplexConv2d,
}

impl UpsampleConv {
    pub fn forward(&self, fwd: &Forward<'_>, x: Var) -> Result<Var> {
        let up = upsample_nearest(fwd.tape, x)?;
        self.conv.forward(fwd, up)
    }
}
