use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Overlap `100·2|X∩Y| / (|X|+|Y|)`; 100 when both masks are empty.
pub fn dice(x: &BinaryMask, y: &BinaryMask) -> Result<f64> {
    x.check_same(y)?;
    let (mut inter, mut nx, mut ny) = (0usize, 0usize, 0usize);
    for (&a, &b) in x.bits().iter().zip(y.bits()) {
        inter += (a && b) as usize;
        nx += a as usize;
        ny += b as usize;
    }
    if nx + ny == 0 {
        return Ok(100.0);
    }
    Ok(100.0 * 2.0 * inter as f64 / (nx + ny) as f64)
}

const FAR: f64 = 1e20;

/// Exact 1D squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let parabola = |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
        let mut s = parabola(v[k]);
        // z[0] = −∞ stops the scan
        while s <= z[k] {
            k -= 1;
            s = parabola(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from every pixel to the nearest set pixel of
/// `m`; `None` when `m` is empty.
pub fn squared_distance_transform(m: &BinaryMask) -> Option<Vec<f64>> {
    if m.is_empty() {
        return None;
    }
    let (h, w) = m.shape();
    let n = h.max(w);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    let mut grid: Vec<f64> = m.bits().iter().map(|&b| if b { 0.0 } else { FAR }).collect();
    let (mut col, mut out) = (vec![0.0; h], vec![0.0; h]);
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        dt_1d(&col, &mut out, &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    let mut row = vec![0.0; w];
    for y in 0..h {
        dt_1d(&grid[y * w..(y + 1) * w], &mut row, &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&row);
    }
    Some(grid)
}

/// Outcome of a directed Hausdorff query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hausdorff {
    Distance(f64),
    /// Empty prediction against a non-empty reference.
    EmptyPrediction,
}

/// `max_{x∈X} min_{y∈Y} ‖x − y‖` in pixels.
pub fn directed_hausdorff(x: &BinaryMask, y: &BinaryMask) -> Result<Hausdorff> {
    x.check_same(y)?;
    let dt = squared_distance_transform(y)
        .ok_or_else(|| Error::Contract("directed Hausdorff undefined for an empty reference mask".into()))?;
    if x.is_empty() {
        return Ok(Hausdorff::EmptyPrediction);
    }
    let w = x.shape().1;
    let worst = x.points().map(|(r, c)| dt[r * w + c]).fold(0.0, f64::max);
    Ok(Hausdorff::Distance(worst.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        100.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl Confusion {
    /// Pixel counts with `truth` as ground truth.
    pub fn count(pred: &BinaryMask, truth: &BinaryMask) -> Result<Self> {
        pred.check_same(truth)?;
        let mut c = Self::default();
        for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn accuracy(&self) -> f64 {
        percent(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    pub fn sensitivity(&self) -> f64 {
        percent(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        percent(self.tn, self.tn + self.fp)
    }
}

/// `(accuracy, sensitivity, specificity)` in percent.
pub fn confusion_metrics(pred: &BinaryMask, truth: &BinaryMask) -> Result<(f64, f64, f64)> {
    let c = Confusion::count(pred, truth)?;
    Ok((c.accuracy(), c.sensitivity(), c.specificity()))
}
