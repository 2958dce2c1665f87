use rand::Rng;

use super::activation::{crelu, ComplexDropout};
use super::batchnorm::ComplexBatchNorm;
use super::conv::ComplexConv2d;
use super::params::{Forward, ParamStore};
use crate::autograd::Var;
use crate::error::{dim_err, Result};

/// `out = F(x) + shortcut(x)` with
/// `F = [conv3×3 → cReLU → BN] × 2 (→ dropout)`.
///
/// The shortcut is the identity when the width is unchanged and a 1×1
/// complex projection otherwise.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv1: ComplexConv2d,
    pub bn1: ComplexBatchNorm,
    pub conv2: ComplexConv2d,
    pub bn2: ComplexBatchNorm,
    pub projection: Option<ComplexConv2d>,
    pub dropout: Option<ComplexDropout>,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ResidualBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        dropout: f64,
        affine: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let conv1 = ComplexConv2d::new(store, &format!("{name}.conv1"), in_channels, out_channels, 3, rng)?;
        let bn1 = ComplexBatchNorm::new(store, &format!("{name}.bn1"), out_channels, affine)?;
        let conv2 = ComplexConv2d::new(store, &format!("{name}.conv2"), out_channels, out_channels, 3, rng)?;
        let bn2 = ComplexBatchNorm::new(store, &format!("{name}.bn2"), out_channels, affine)?;
        let projection = if in_channels != out_channels {
            Some(ComplexConv2d::new(store, &format!("{name}.proj"), in_channels, out_channels, 1, rng)?)
        } else {
            None
        };
        let dropout = (dropout > 0.0).then_some(ComplexDropout { p: dropout });
        Ok(Self { conv1, bn1, conv2, bn2, projection, dropout, in_channels, out_channels })
    }

    pub fn forward(&self, fwd: &Forward<'_>, x: Var) -> Result<Var> {
        let shape = fwd.tape.shape(x);
        if shape.len() != 4 || shape[1] != self.in_channels {
            return dim_err(format!("residual block expects {} channels, got {shape:?}", self.in_channels));
        }
        let tape = fwd.tape;
        let mut h = self.conv1.forward(fwd, x)?;
        h = crelu(tape, h);
        h = self.bn1.forward(fwd, h)?;
        h = self.conv2.forward(fwd, h)?;
        h = crelu(tape, h);
        h = self.bn2.forward(fwd, h)?;
        if let Some(d) = &self.dropout {
            h = d.forward(fwd, h)?;
        }
        let skip = match &self.projection {
            Some(p) => p.forward(fwd, x)?,
            None => x,
        };
        tape.add(h, skip)
    }
}
