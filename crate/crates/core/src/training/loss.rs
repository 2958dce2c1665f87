use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean complex modulus `|pred − target|`.
    #[default]
    Modulus,
    /// Mean `|Δre| + |Δim|`.
    Split,
}

/// Mean over elements of `|pred − target|`; the subgradient at a zero
/// difference is 0.
pub fn complex_l1(tape: &Tape, pred: Var, target: &ComplexTensor) -> Result<Var> {
    l1(tape, pred, target, LossKind::Modulus)
}

pub fn l1(tape: &Tape, pred: Var, target: &ComplexTensor, kind: LossKind) -> Result<Var> {
    let pv = tape.value(pred);
    if pv.shape() != target.shape() {
        return dim_err(format!("loss: prediction {:?} vs target {:?}", pv.shape(), target.shape()));
    }
    let n = pv.len();
    if n == 0 {
        return Err(Error::Contract("loss over an empty tensor".into()));
    }
    let diff = pv.sub(target)?;
    let (dr, di) = (diff.re(), diff.im());
    let total: f64 = match kind {
        LossKind::Modulus => dr.iter().zip(di).map(|(r, i)| r.hypot(*i)).sum(),
        LossKind::Split => dr.iter().zip(di).map(|(r, i)| r.abs() + i.abs()).sum(),
    };
    let value = ComplexTensor::scalar(num_complex::Complex64::new(total / n as f64, 0.0));
    Ok(tape.push(
        value,
        &[pred],
        Box::new(move |g, _| {
            let s = g.re()[0] / n as f64;
            let (dr, di) = (diff.re(), diff.im());
            let (re, im): (Vec<f64>, Vec<f64>) = match kind {
                LossKind::Modulus => dr
                    .iter()
                    .zip(di)
                    .map(|(&r, &i)| {
                        let m = r.hypot(i);
                        if m == 0.0 {
                            (0.0, 0.0)
                        } else {
                            (s * r / m, s * i / m)
                        }
                    })
                    .unzip(),
                LossKind::Split => dr.iter().zip(di).map(|(&r, &i)| (s * sign(r), s * sign(i))).unzip(),
            };
            vec![Some(ComplexTensor::from_parts(diff.shape(), re, im).expect("same shape"))]
        }),
    ))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot(n: usize, at: usize, re: f64, im: f64) -> ComplexTensor {
        let mut t = ComplexTensor::zeros(&[n]);
        t.re_mut()[at] = re;
        t.im_mut()[at] = im;
        t
    }

    #[test]
    fn equal_inputs_give_zero() {
        let tape = Tape::new();
        let t = one_hot(5, 2, 1.0, -2.0);
        let p = tape.leaf(t.clone(), true);
        let l = complex_l1(&tape, p, &t).unwrap();
        assert_eq!(tape.value(l).re()[0], 0.0);
        let g = tape.backward(l).unwrap();
        assert_eq!(g[&p].energy(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let n = 8;
        let tape = Tape::new();
        let p = tape.leaf(one_hot(n, 3, 3.0, 4.0), true);
        let l = complex_l1(&tape, p, &ComplexTensor::zeros(&[n])).unwrap();
        assert_eq!(tape.value(l).re()[0], 5.0 / n as f64);
        let g = tape.backward(l).unwrap();
        let gp = &g[&p];
        assert!((gp.re()[3] - 0.6 / n as f64).abs() < 1e-15);
        assert!((gp.im()[3] - 0.8 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mk = |rng: &mut ChaCha8Rng| {
            ComplexTensor::from_parts(
                &[2, 3, 4],
                (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let (x, target) = (mk(&mut rng), mk(&mut rng));
        for kind in [LossKind::Modulus, LossKind::Split] {
            let err = grad_check(|t, v| l1(t, v, &target, kind), &x, 1e-6).unwrap();
            assert!(err < 1e-4, "{kind:?}: {err}");
        }
        let one = one_hot(1, 0, 3.0, 4.0);
        let err = grad_check(|t, v| complex_l1(t, v, &ComplexTensor::zeros(&[1])), &one, 1e-6).unwrap();
        assert!(err < 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let tape = Tape::new();
        let p = tape.leaf(ComplexTensor::zeros(&[3]), true);
        assert!(complex_l1(&tape, p, &ComplexTensor::zeros(&[4])).is_err());
    }
}
