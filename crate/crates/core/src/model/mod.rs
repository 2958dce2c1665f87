//! The k-strip U-Net: a frequency-to-frequency map from centred head
//! k-space to centred brain-only k-space.
//!
//! ```text
//! enc ℓ:   residual × blocks  ──skip──────────────┐
//!            │ spectral pool                      │
//!          …                                      │
//! bottleneck: residual × blocks                   │
//!            │ upsample + conv                    │
//! dec ℓ:   concat(skip) → residual × dec_blocks ◄─┘
//! head:    1×1 complex conv → 1 channel
//! ```

mod checkpoint;

pub use checkpoint::{Checkpoint, TensorRecord, TensorRole, CHECKPOINT_MAGIC};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Error, Result};
use crate::layers::{
    concat_channels, spectral_pool, ComplexConv2d, Forward, Mode, ParamStore, ResidualBlock, UpsampleConv,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStripConfig {
    pub input_size: (usize, usize),
    pub base_channels: usize,
    /// Number of spectral pooling steps.
    pub levels: usize,
    /// Residual blocks per encoder level and in the bottleneck.
    pub blocks_per_level: usize,
    /// Residual blocks per decoder level.
    pub decoder_blocks: usize,
    pub bottleneck_channels: usize,
    pub dropout: f64,
    /// Learnable Γ, β in every batch norm.
    pub affine: bool,
    /// The network sees `k / kspace_scale` and its output is multiplied back.
    pub kspace_scale: f64,
}

impl Default for KStripConfig {
    fn default() -> Self {
        Self {
            input_size: (256, 256),
            base_channels: 32,
            levels: 3,
            blocks_per_level: 4,
            decoder_blocks: 4,
            bottleneck_channels: 256,
            dropout: 0.05,
            affine: true,
            kspace_scale: 256.0,
        }
    }
}

impl KStripConfig {
    /// Desk-scale network: 64×64 input, two levels, eight base channels.
    pub fn desk() -> Self {
        Self {
            input_size: (64, 64),
            base_channels: 8,
            levels: 2,
            blocks_per_level: 2,
            decoder_blocks: 2,
            bottleneck_channels: 32,
            kspace_scale: 64.0,
            ..Self::default()
        }
    }

    /// Smallest useful network, for gradient checks and overfit tests.
    pub fn miniature(size: usize) -> Self {
        Self {
            input_size: (size, size),
            base_channels: 2,
            levels: 1,
            blocks_per_level: 1,
            decoder_blocks: 1,
            bottleneck_channels: 4,
            dropout: 0.0,
            kspace_scale: size as f64,
            ..Self::default()
        }
    }

    pub fn width(&self, level: usize) -> usize {
        self.base_channels << level
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_size;
        let step = 1usize << self.levels;
        let bad = |m: String| Err(Error::Config(m));
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if h == 0 || w == 0 || h % step != 0 || w % step != 0 {
            return bad(format!("input {h}x{w} not divisible by 2^{}", self.levels));
        }
        if self.base_channels == 0 {
            return bad("base_channels must be positive".into());
        }
        if self.bottleneck_channels != self.width(self.levels) {
            return bad(format!(
                "bottleneck_channels {} must equal base_channels·2^levels = {}",
                self.bottleneck_channels,
                self.width(self.levels)
            ));
        }
        if self.blocks_per_level == 0 || self.decoder_blocks == 0 {
            return bad("blocks per level must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.kspace_scale.is_finite() && self.kspace_scale > 0.0) {
            return bad(format!("kspace_scale {} must be positive", self.kspace_scale));
        }
        Ok(())
    }

    /// Activation shapes `(name, [C, H, W])` at every stage, per sample.
    pub fn shape_plan(&self) -> Vec<(String, [usize; 3])> {
        let (mut h, mut w) = self.input_size;
        let mut plan = vec![("input".to_string(), [1, h, w])];
        for l in 0..self.levels {
            plan.push((format!("enc{l}"), [self.width(l), h, w]));
            h /= 2;
            w /= 2;
        }
        plan.push(("bottleneck".into(), [self.bottleneck_channels, h, w]));
        for l in (0..self.levels).rev() {
            h *= 2;
            w *= 2;
            plan.push((format!("dec{l}"), [self.width(l), h, w]));
        }
        plan.push(("output".into(), [1, h, w]));
        plan
    }
}

#[derive(Debug, Clone)]
pub struct DecoderLevel {
    pub up: UpsampleConv,
    pub blocks: Vec<ResidualBlock>,
}

#[derive(Debug, Clone)]
pub struct KStripModel {
    pub config: KStripConfig,
    pub store: ParamStore,
    pub encoder: Vec<Vec<ResidualBlock>>,
    pub bottleneck: Vec<ResidualBlock>,
    /// Deepest level first.
    pub decoder: Vec<DecoderLevel>,
    pub head: ComplexConv2d,
}

/// Named activation shapes captured during a forward pass.
pub type Trace = Vec<(String, Vec<usize>)>;

impl KStripModel {
    pub fn build(config: KStripConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let chain = |store: &mut ParamStore,
                     rng: &mut ChaCha8Rng,
                     name: &str,
                     cin: usize,
                     cout: usize,
                     n: usize,
                     dropout: f64|
         -> Result<Vec<ResidualBlock>> {
            (0..n)
                .map(|i| {
                    let input = if i == 0 { cin } else { cout };
                    ResidualBlock::new(store, &format!("{name}.block{i}"), input, cout, dropout, config.affine, rng)
                })
                .collect()
        };

        let mut encoder = Vec::with_capacity(config.levels);
        let mut cin = 1;
        for l in 0..config.levels {
            let cout = config.width(l);
            encoder.push(chain(&mut store, &mut rng, &format!("enc{l}"), cin, cout, config.blocks_per_level, config.dropout)?);
            cin = cout;
        }
        let bottleneck = chain(
            &mut store,
            &mut rng,
            "bottleneck",
            cin,
            config.bottleneck_channels,
            config.blocks_per_level,
            0.0,
        )?;
        let mut decoder = Vec::with_capacity(config.levels);
        let mut below = config.bottleneck_channels;
        for l in (0..config.levels).rev() {
            let width = config.width(l);
            let conv = ComplexConv2d::new(&mut store, &format!("dec{l}.up"), below, width, 3, &mut rng)?;
            let blocks = chain(&mut store, &mut rng, &format!("dec{l}"), 2 * width, width, config.decoder_blocks, 0.0)?;
            decoder.push(DecoderLevel { up: UpsampleConv { conv }, blocks });
            below = width;
        }
        let head = ComplexConv2d::new(&mut store, "head", config.base_channels, 1, 1, &mut rng)?;
        Ok(Self { config, store, encoder, bottleneck, decoder, head })
    }

    pub fn num_residual_blocks(&self) -> usize {
        self.encoder.iter().map(Vec::len).sum::<usize>()
            + self.bottleneck.len()
            + self.decoder.iter().map(|d| d.blocks.len()).sum::<usize>()
    }

    /// Forward pass on `[B, 1, H, W]` centred k-space.
    pub fn forward(&self, fwd: &Forward<'_>, x: Var) -> Result<Var> {
        self.forward_traced(fwd, x, None)
    }

    pub fn forward_traced(&self, fwd: &Forward<'_>, x: Var, mut trace: Option<&mut Trace>) -> Result<Var> {
        let tape = fwd.tape;
        let shape = tape.shape(x);
        let (h, w) = self.config.input_size;
        if shape.len() != 4 || shape[1] != 1 || shape[2] != h || shape[3] != w {
            return dim_err(format!("model expects [B, 1, {h}, {w}], got {shape:?}"));
        }
        let mut record = |name: &str, v: Var| {
            if let Some(t) = trace.as_deref_mut() {
                t.push((name.to_string(), tape.shape(v)));
            }
        };
        let scale = self.config.kspace_scale;
        let mut h = tape.scale(x, 1.0 / scale);
        let mut skips = Vec::with_capacity(self.encoder.len());
        for (l, level) in self.encoder.iter().enumerate() {
            for block in level {
                h = block.forward(fwd, h)?;
            }
            record(&format!("enc{l}"), h);
            skips.push(h);
            h = spectral_pool(tape, h)?;
        }
        for block in &self.bottleneck {
            h = block.forward(fwd, h)?;
        }
        record("bottleneck", h);
        for (level, skip) in self.decoder.iter().zip(skips.into_iter().rev()) {
            h = level.up.forward(fwd, h)?;
            h = concat_channels(tape, h, skip)?;
            for block in &level.blocks {
                h = block.forward(fwd, h)?;
            }
        }
        h = self.head.forward(fwd, h)?;
        let out = tape.scale(h, scale);
        record("output", out);
        Ok(out)
    }

    /// Inference on a batch `[B, 1, H, W]`: dropout off, running statistics.
    pub fn predict(&self, k_in: &ComplexTensor) -> Result<ComplexTensor> {
        let tape = Tape::new();
        let fwd = Forward::new(&tape, &self.store, Mode::Eval).frozen();
        let x = tape.constant(k_in.clone());
        let out = self.forward(&fwd, x)?;
        let v = tape.value(out);
        Ok((*v).clone())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        Checkpoint::from_model(self).write(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Checkpoint::read(path)?.into_model()
    }

    /// Rebuild the architecture for `config` and copy tensors in by name.
    pub fn from_tensors<'a>(config: KStripConfig, tensors: impl IntoIterator<Item = (&'a str, &'a ComplexTensor)>) -> Result<Self> {
        let mut model = Self::build(config, 0)?;
        let mut seen = 0;
        for (name, t) in tensors {
            let id = model
                .store
                .id_of(name)
                .ok_or_else(|| Error::Format(format!("checkpoint tensor {name} not in model")))?;
            if model.store.get(id).shape() != t.shape() {
                return Err(Error::Format(format!(
                    "tensor {name}: shape {:?}, model expects {:?}",
                    t.shape(),
                    model.store.get(id).shape()
                )));
            }
            *model.store.get_mut(id) = t.clone();
            seen += 1;
        }
        if seen != model.store.len() {
            return Err(Error::Format(format!("checkpoint has {seen} of {} model tensors", model.store.len())));
        }
        Ok(model)
    }
}
