use rand::Rng;

use super::params::Forward;
use crate::autograd::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};

/// cReLU: ReLU applied to the real and imaginary planes separately.
pub fn crelu(tape: &Tape, x: Var) -> Var {
    let xv = tape.value(x);
    let relu = |p: &[f64]| p.iter().map(|&v| v.max(0.0)).collect::<Vec<_>>();
    let out = ComplexTensor::from_parts(xv.shape(), relu(xv.re()), relu(xv.im())).expect("same shape");
    tape.push(
        out,
        &[x],
        Box::new(move |g, _| {
            let gate = |gp: &[f64], xp: &[f64]| {
                gp.iter().zip(xp).map(|(&g, &x)| if x > 0.0 { g } else { 0.0 }).collect::<Vec<_>>()
            };
            let gx = ComplexTensor::from_parts(g.shape(), gate(g.re(), xv.re()), gate(g.im(), xv.im()))
                .expect("same shape");
            vec![Some(gx)]
        }),
    )
}

/// Multiply both planes by a fixed real mask.
fn masked(tape: &Tape, x: Var, mask: Vec<f64>) -> Var {
    let xv = tape.value(x);
    let apply = |p: &[f64]| p.iter().zip(&mask).map(|(v, m)| v * m).collect::<Vec<_>>();
    let out = ComplexTensor::from_parts(xv.shape(), apply(xv.re()), apply(xv.im())).expect("same shape");
    tape.push(
        out,
        &[x],
        Box::new(move |g, _| {
            let apply = |p: &[f64]| p.iter().zip(&mask).map(|(v, m)| v * m).collect::<Vec<_>>();
            vec![Some(ComplexTensor::from_parts(g.shape(), apply(g.re()), apply(g.im())).expect("same shape"))]
        }),
    )
}

/// Complex dropout: one Bernoulli(1−p) draw per element, shared by both
/// planes so the phase of surviving values is untouched. Survivors are
/// scaled by `1/(1−p)`. Identity outside training.
pub fn complex_dropout(tape: &Tape, x: Var, p: f64, rng: &mut impl Rng, training: bool) -> Result<Var> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - p);
    let n = tape.value(x).len();
    let mask = (0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
    Ok(masked(tape, x, mask))
}

/// Dropout layer drawing from the forward pass's rng.
#[derive(Debug, Clone, Copy)]
pub struct ComplexDropout {
    pub p: f64,
}

impl ComplexDropout {
    pub fn forward(&self, fwd: &Forward<'_>, x: Var) -> Result<Var> {
        let training = fwd.training();
        complex_dropout(fwd.tape, x, self.p, &mut *fwd.rng(), training)
    }
}
