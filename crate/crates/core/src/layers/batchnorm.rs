//! Complex batch normalisation.
//!
//! Per channel the joint (re, im) distribution is centred and whitened by
//! the inverse principal square root of its regularised 2×2 covariance,
//! then an affine map `Γ·x̃ + β` is applied (Γ a real 2×2 matrix, β complex).
//!
//! For a symmetric positive definite `A = [[p, q], [q, r]]` with
//! `s = √det A` and `t = √(tr A + 2s)`:
//!
//! ```text
//! A^{-1/2} = [[r + s, −q], [−q, p + s]] / (s·t)
//! ```


use super::params::{Forward, ParamId, ParamKind, ParamStore};
use crate::autograd::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Symmetric 2×2 matrix `[[rr, ri], [ri, ii]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub rr: f64,
    pub ri: f64,
    pub ii: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { rr: 1.0, ri: 0.0, ii: 1.0 };

    /// Inverse principal square root of `self + eps·I`, plus the
    /// intermediates `(s, t)` needed by the backward pass.
    pub fn inv_sqrt(self, eps: f64) -> (Sym2, f64, f64) {
        let (p, q, r) = (self.rr + eps, self.ri, self.ii + eps);
        let s = (p * r - q * q).sqrt();
        let t = (p + r + 2.0 * s).sqrt();
        let k = 1.0 / (s * t);
        (Sym2 { rr: (r + s) * k, ri: -q * k, ii: (p + s) * k }, s, t)
    }

    fn apply(self, x: f64, y: f64) -> (f64, f64) {
        (self.rr * x + self.ri * y, self.ri * x + self.ii * y)
    }

    fn is_finite(self) -> bool {
        self.rr.is_finite() && self.ri.is_finite() && self.ii.is_finite()
    }
}

/// Chain rule through `M = (V + εI)^{-1/2}`: maps `∂L/∂M` (with the two
/// off-diagonal entries already summed) to `∂L/∂(V_rr, V_ri, V_ii)`.
fn inv_sqrt_backward(v: Sym2, eps: f64, g_m: Sym2) -> Sym2 {
    let (p, q, r) = (v.rr + eps, v.ri, v.ii + eps);
    let s = (p * r - q * q).sqrt();
    let t = (p + r + 2.0 * s).sqrt();
    let k = 1.0 / (s * t);
    let g_k = g_m.rr * (r + s) - g_m.ri * q + g_m.ii * (p + s);
    let g_t = -g_k * k / t;
    let g_s = (g_m.rr + g_m.ii) * k - g_k * k / s + g_t / t;
    Sym2 {
        rr: g_m.ii * k + g_t / (2.0 * t) + g_s * r / (2.0 * s),
        ri: -g_m.ri * k - g_s * q / s,
        ii: g_m.rr * k + g_t / (2.0 * t) + g_s * p / (2.0 * s),
    }
}

/// Real 2×2 affine matrix, stored row-wise as two complex numbers.
#[derive(Debug, Clone, Copy)]
struct Mat2 {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Mat2 {
    const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnStats {
    pub mean_re: f64,
    pub mean_im: f64,
    pub cov: Sym2,
}

/// Per-channel batch statistics (biased covariance) of `[B, C, H, W]`.
pub fn batch_stats(x: &ComplexTensor) -> Result<Vec<BnStats>> {
    let [b, c, h, w] = *x.shape() else {
        return dim_err(format!("batch norm expects [B, C, H, W], got {:?}", x.shape()));
    };
    let hw = h * w;
    let n = (b * hw) as f64;
    let mut out = Vec::with_capacity(c);
    for ch in 0..c {
        let spans = (0..b).map(|i| (i * c + ch) * hw..(i * c + ch + 1) * hw);
        let (mut sr, mut si) = (0.0, 0.0);
        for s in spans.clone() {
            sr += x.re()[s.clone()].iter().sum::<f64>();
            si += x.im()[s].iter().sum::<f64>();
        }
        let (mr, mi) = (sr / n, si / n);
        let (mut vrr, mut vri, mut vii) = (0.0, 0.0, 0.0);
        for s in spans {
            for (&r, &i) in x.re()[s.clone()].iter().zip(&x.im()[s]) {
                let (dr, di) = (r - mr, i - mi);
                vrr += dr * dr;
                vri += dr * di;
                vii += di * di;
            }
        }
        out.push(BnStats { mean_re: mr, mean_im: mi, cov: Sym2 { rr: vrr / n, ri: vri / n, ii: vii / n } });
    }
    Ok(out)
}

/// Whitening + affine transform of a `[B, C, H, W]` tensor.
///
/// With `running = None` the batch statistics are used and differentiated
/// through; otherwise the given statistics are treated as constants.
pub fn complex_batchnorm(
    tape: &Tape,
    x: Var,
    gamma: Option<Var>,
    beta: Option<Var>,
    running: Option<&[BnStats]>,
    eps: f64,
) -> Result<(Var, Vec<BnStats>)> {
    let xv = tape.value(x);
    let [b, c, h, w] = *xv.shape() else {
        return dim_err(format!("batch norm expects [B, C, H, W], got {:?}", xv.shape()));
    };
    let hw = h * w;
    let training = running.is_none();
    if training && b * hw < 2 {
        return Err(Error::Contract("batch norm training needs at least 2 values per channel".into()));
    }
    let stats = match running {
        Some(r) if r.len() == c => r.to_vec(),
        Some(r) => return dim_err(format!("running stats for {} channels, input has {c}", r.len())),
        None => batch_stats(&xv)?,
    };
    let gv = gamma.map(|g| tape.value(g));
    let bv = beta.map(|g| tape.value(g));
    if let Some(g) = &gv {
        if g.shape() != [c, 2] {
            return dim_err(format!("gamma shape {:?}, expected [{c}, 2]", g.shape()));
        }
    }
    if let Some(bb) = &bv {
        if bb.shape() != [c] {
            return dim_err(format!("beta shape {:?}, expected [{c}]", bb.shape()));
        }
    }
    let gamma_of = |ch: usize| match &gv {
        Some(g) => Mat2 { a: g.re()[2 * ch], b: g.im()[2 * ch], c: g.re()[2 * ch + 1], d: g.im()[2 * ch + 1] },
        None => Mat2::IDENTITY,
    };
    let whiten: Vec<Sym2> = stats.iter().map(|s| s.cov.inv_sqrt(eps).0).collect();
    if whiten.iter().any(|m| !m.is_finite()) || stats.iter().any(|s| !s.mean_re.is_finite() || !s.mean_im.is_finite()) {
        return Err(Error::Numeric("non-finite batch norm statistics".into()));
    }

    // whitened values, kept for the backward pass
    let mut white = ComplexTensor::zeros(xv.shape());
    let mut out = ComplexTensor::zeros(xv.shape());
    for ch in 0..c {
        let (m, st, gm) = (whiten[ch], stats[ch], gamma_of(ch));
        let (br, bi) = bv.as_ref().map_or((0.0, 0.0), |bb| (bb.re()[ch], bb.im()[ch]));
        for i in 0..b {
            for j in (i * c + ch) * hw..(i * c + ch + 1) * hw {
                let (yr, yi) = m.apply(xv.re()[j] - st.mean_re, xv.im()[j] - st.mean_im);
                white.re_mut()[j] = yr;
                white.im_mut()[j] = yi;
                out.re_mut()[j] = gm.a * yr + gm.b * yi + br;
                out.im_mut()[j] = gm.c * yr + gm.d * yi + bi;
            }
        }
    }

    let mut parents = vec![x];
    parents.extend(gamma);
    parents.extend(beta);
    let (has_gamma, has_beta) = (gamma.is_some(), beta.is_some());
    let shape = xv.shape().to_vec();
    let batch_stats_out = stats.clone();
    let var = tape.push(
        out,
        &parents,
        Box::new(move |g, need| {
            let n = (b * hw) as f64;
            let mut gx = ComplexTensor::zeros(&shape);
            let mut ggamma = ComplexTensor::zeros(&[c, 2]);
            let mut gbeta = ComplexTensor::zeros(&[c]);
            let gamma_of = |ch: usize| match &gv {
                Some(g) => Mat2 { a: g.re()[2 * ch], b: g.im()[2 * ch], c: g.re()[2 * ch + 1], d: g.im()[2 * ch + 1] },
                None => Mat2::IDENTITY,
            };
            for ch in 0..c {
                let (m, st, gm) = (whiten[ch], stats[ch], gamma_of(ch));
                let idx = || (0..b).flat_map(move |i| (i * c + ch) * hw..(i * c + ch + 1) * hw);
                let (mut da, mut db, mut dc, mut dd, mut dbr, mut dbi) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                // G = Σ h·cᵀ with h = Γᵀ g
                let (mut g11, mut g12, mut g21, mut g22) = (0.0, 0.0, 0.0, 0.0);
                for j in idx() {
                    let (gr, gi) = (g.re()[j], g.im()[j]);
                    let (yr, yi) = (white.re()[j], white.im()[j]);
                    da += gr * yr;
                    db += gr * yi;
                    dc += gi * yr;
                    dd += gi * yi;
                    dbr += gr;
                    dbi += gi;
                    if training {
                        let (hr, hi) = (gm.a * gr + gm.c * gi, gm.b * gr + gm.d * gi);
                        let (cr, ci) = (xv.re()[j] - st.mean_re, xv.im()[j] - st.mean_im);
                        g11 += hr * cr;
                        g12 += hr * ci;
                        g21 += hi * cr;
                        g22 += hi * ci;
                    }
                }
                ggamma.re_mut()[2 * ch] = da;
                ggamma.im_mut()[2 * ch] = db;
                ggamma.re_mut()[2 * ch + 1] = dc;
                ggamma.im_mut()[2 * ch + 1] = dd;
                gbeta.re_mut()[ch] = dbr;
                gbeta.im_mut()[ch] = dbi;

                if !need[0] {
                    continue;
                }
                let gv_cov = if training {
                    inv_sqrt_backward(st.cov, eps, Sym2 { rr: g11, ri: g12 + g21, ii: g22 })
                } else {
                    Sym2 { rr: 0.0, ri: 0.0, ii: 0.0 }
                };
                let (mut sum_r, mut sum_i) = (0.0, 0.0);
                for j in idx() {
                    let (gr, gi) = (g.re()[j], g.im()[j]);
                    let (hr, hi) = (gm.a * gr + gm.c * gi, gm.b * gr + gm.d * gi);
                    let (mut dr, mut di) = m.apply(hr, hi);
                    if training {
                        let (cr, ci) = (xv.re()[j] - st.mean_re, xv.im()[j] - st.mean_im);
                        dr += (2.0 * cr * gv_cov.rr + ci * gv_cov.ri) / n;
                        di += (cr * gv_cov.ri + 2.0 * ci * gv_cov.ii) / n;
                    }
                    gx.re_mut()[j] = dr;
                    gx.im_mut()[j] = di;
                    sum_r += dr;
                    sum_i += di;
                }
                if training {
                    let (mr, mi) = (sum_r / n, sum_i / n);
                    for j in idx() {
                        gx.re_mut()[j] -= mr;
                        gx.im_mut()[j] -= mi;
                    }
                }
            }
            let mut v = vec![need[0].then_some(gx)];
            if has_gamma {
                v.push(Some(ggamma));
            }
            if has_beta {
                v.push(Some(gbeta));
            }
            v
        }),
    );
    Ok((var, batch_stats_out))
}

/// Complex batch-norm layer with running statistics.
#[derive(Debug, Clone)]
pub struct ComplexBatchNorm {
    pub channels: usize,
    pub gamma: Option<ParamId>,
    pub beta: Option<ParamId>,
    /// `[C]`: running complex mean.
    pub running_mean: ParamId,
    /// `[C, 2]`: `(V_rr + i·V_ri, V_ii)` per channel.
    pub running_cov: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl ComplexBatchNorm {
    /// Γ starts at `I/√2`, β at zero; running covariance at the identity.
    pub fn new(store: &mut ParamStore, name: &str, channels: usize, affine: bool) -> Result<Self> {
        let (gamma, beta) = if affine {
            let g0 = std::f64::consts::FRAC_1_SQRT_2;
            let mut g = ComplexTensor::zeros(&[channels, 2]);
            for ch in 0..channels {
                g.re_mut()[2 * ch] = g0;
                g.im_mut()[2 * ch + 1] = g0;
            }
            (
                Some(store.register(format!("{name}.gamma"), ParamKind::Trainable, g)?),
                Some(store.register(format!("{name}.beta"), ParamKind::Trainable, ComplexTensor::zeros(&[channels]))?),
            )
        } else {
            (None, None)
        };
        let running_mean = store.register(format!("{name}.running_mean"), ParamKind::Buffer, ComplexTensor::zeros(&[channels]))?;
        let mut cov = ComplexTensor::zeros(&[channels, 2]);
        for ch in 0..channels {
            cov.re_mut()[2 * ch] = 1.0;
            cov.re_mut()[2 * ch + 1] = 1.0;
        }
        let running_cov = store.register(format!("{name}.running_cov"), ParamKind::Buffer, cov)?;
        Ok(Self { channels, gamma, beta, running_mean, running_cov, eps: DEFAULT_EPS, momentum: DEFAULT_MOMENTUM })
    }

    pub fn running_stats(&self, store: &ParamStore) -> Vec<BnStats> {
        let (m, v) = (store.get(self.running_mean), store.get(self.running_cov));
        (0..self.channels)
            .map(|ch| BnStats {
                mean_re: m.re()[ch],
                mean_im: m.im()[ch],
                cov: Sym2 { rr: v.re()[2 * ch], ri: v.im()[2 * ch], ii: v.re()[2 * ch + 1] },
            })
            .collect()
    }

    pub fn forward(&self, fwd: &Forward<'_>, x: Var) -> Result<Var> {
        let gamma = self.gamma.map(|id| fwd.param(id));
        let beta = self.beta.map(|id| fwd.param(id));
        if !fwd.training() {
            let running = self.running_stats(fwd.store());
            return Ok(complex_batchnorm(fwd.tape, x, gamma, beta, Some(&running), self.eps)?.0);
        }
        let (out, batch) = complex_batchnorm(fwd.tape, x, gamma, beta, None, self.eps)?;
        let old = self.running_stats(fwd.store());
        let mo = self.momentum;
        let blend = |a: f64, b: f64| (1.0 - mo) * a + mo * b;
        let mut mean = ComplexTensor::zeros(&[self.channels]);
        let mut cov = ComplexTensor::zeros(&[self.channels, 2]);
        for (ch, (o, s)) in old.iter().zip(&batch).enumerate() {
            mean.re_mut()[ch] = blend(o.mean_re, s.mean_re);
            mean.im_mut()[ch] = blend(o.mean_im, s.mean_im);
            cov.re_mut()[2 * ch] = blend(o.cov.rr, s.cov.rr);
            cov.im_mut()[2 * ch] = blend(o.cov.ri, s.cov.ri);
            cov.re_mut()[2 * ch + 1] = blend(o.cov.ii, s.cov.ii);
        }
        fwd.push_update(self.running_mean, mean);
        fwd.push_update(self.running_cov, cov);
        Ok(out)
    }

    /// Replace Γ by the identity (tests and ablations).
    pub fn set_gamma_identity(&self, store: &mut ParamStore) {
        if let Some(id) = self.gamma {
            let g = store.get_mut(id);
            for ch in 0..self.channels {
                g.re_mut()[2 * ch] = 1.0;
                g.im_mut()[2 * ch] = 0.0;
                g.re_mut()[2 * ch + 1] = 0.0;
                g.im_mut()[2 * ch + 1] = 1.0;
            }
        }
    }
}

/// Random tensor helper shared by layer tests.
#[cfg(test)]
pub(crate) fn random_tensor(shape: &[usize], rng: &mut impl rand::Rng) -> ComplexTensor {
    let n: usize = shape.iter().product();
    ComplexTensor::from_parts(
        shape,
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}
