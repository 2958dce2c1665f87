//! Loss, optimizer and the epoch loop.

mod loss;
mod optim;

pub use loss::{complex_l1, l1, LossKind};
pub use optim::{clip_grad_norm, Adam, AdamConfig, LrSchedule};

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Tape;
use crate::ctensor::ComplexTensor;
use crate::data::{augment_pair, PeripheryConfig, SliceSample};
use crate::error::{Error, Result};
use crate::layers::{Forward, Mode};
use crate::model::{Checkpoint, KStripModel, TensorRecord, TensorRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Periphery augmentation of training batches; `None` disables it.
    pub augment: Option<PeripheryConfig>,
    pub loss: LossKind,
    /// Global gradient-norm clip.
    pub clip_norm: Option<f64>,
    /// Validate every n epochs (and always after the final one).
    pub validate_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 64,
            schedule: LrSchedule::default(),
            adam: AdamConfig::default(),
            seed: 0,
            augment: Some(PeripheryConfig::default()),
            loss: LossKind::Modulus,
            clip_norm: None,
            validate_every: 1,
        }
    }
}

impl TrainConfig {
    /// 50 epochs of batch 16 with the decay period halved to 25.
    pub fn desk() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            schedule: LrSchedule { period: 25, ..LrSchedule::default() },
            augment: Some(PeripheryConfig::for_size(64)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.schedule.initial > 0.0 && self.schedule.initial.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.schedule.period == 0 {
            return bad("lr decay period must be at least 1");
        }
        if self.validate_every == 0 {
            return bad("validate_every must be at least 1");
        }
        if let Some(a) = &self.augment {
            if a.width.0 > a.width.1 || a.factor.0 > a.factor.1 {
                return bad("augmentation ranges are inverted");
            }
        }
        Ok(())
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub lr: f64,
    pub seconds: f64,
    pub steps: usize,
}

const AUGMENT_STREAM: u64 = 0x6175_676d;
const DROPOUT_STREAM: u64 = 0x6472_6f70;

fn keyed_rng(seed: u64, salt: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(stream);
    rng
}

/// Stack `[1, H, W]` tensors into `[B, 1, H, W]`.
fn stack(items: &[&ComplexTensor]) -> Result<ComplexTensor> {
    ComplexTensor::stack(items)
}

/// Model, optimizer and progress; everything needed to resume bit-exactly.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: KStripModel,
    pub optimizer: Adam,
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub best_val: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrainMeta {
    epoch: usize,
    best_val: Option<f64>,
    adam_step: u64,
    train: TrainConfig,
}

impl Trainer {
    pub fn new(model: KStripModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = Adam::new(&model.store, config.adam);
        Ok(Self { model, optimizer, config, epoch: 0, best_val: None })
    }

    /// Checkpoint including optimizer moments and progress.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::from_model(&self.model);
        for (&id, (m, v)) in &self.optimizer.moments {
            let name = self.model.store.name(id);
            for (tag, t) in [("m", m), ("v", v)] {
                ck.tensors.push(TensorRecord {
                    name: format!("adam.{tag}.{name}"),
                    role: TensorRole::Optimizer,
                    tensor: t.clone(),
                });
            }
        }
        let meta = TrainMeta {
            epoch: self.epoch,
            best_val: self.best_val,
            adam_step: self.optimizer.step,
            train: self.config.clone(),
        };
        ck.meta = serde_json::to_value(meta).map_err(|e| Error::Format(e.to_string()))?;
        Ok(ck)
    }

    /// Restore from a checkpoint written by [`Trainer::checkpoint`]. With
    /// `config = None` the stored configuration is used; otherwise the given
    /// one (e.g. with more epochs) replaces it.
    pub fn from_checkpoint(ck: &Checkpoint, config: Option<TrainConfig>) -> Result<Self> {
        let model = ck.into_model()?;
        let meta: TrainMeta = serde_json::from_value(ck.meta.clone())
            .map_err(|e| Error::Format(format!("checkpoint has no training state: {e}")))?;
        let config = config.unwrap_or(meta.train);
        config.validate()?;
        let mut optimizer = Adam::new(&model.store, config.adam);
        optimizer.step = meta.adam_step;
        for (&id, (m, v)) in &mut optimizer.moments {
            let name = model.store.name(id);
            for (tag, slot) in [("m", &mut *m), ("v", &mut *v)] {
                let t = ck
                    .tensor(&format!("adam.{tag}.{name}"))
                    .ok_or_else(|| Error::Format(format!("missing optimizer state for {name}")))?;
                if t.shape() != slot.shape() {
                    return Err(Error::Format(format!("optimizer state shape mismatch for {name}")));
                }
                *slot = t.clone();
            }
        }
        Ok(Self { model, optimizer, config, epoch: meta.epoch, best_val: meta.best_val })
    }

    pub fn resume(path: &Path, config: Option<TrainConfig>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?, config)
    }

    fn check_inputs(&self, samples: &[&SliceSample]) -> Result<()> {
        let (h, w) = self.model.config.input_size;
        match samples.iter().find(|s| s.k_in.shape() != [1, h, w]) {
            Some(s) => Err(Error::Config(format!(
                "sample shape {:?} does not match model input {h}x{w}",
                s.k_in.shape()
            ))),
            None => Ok(()),
        }
    }

    /// One pass over `train`; returns the mean batch loss and step count.
    pub fn train_epoch(&mut self, train: &[&SliceSample]) -> Result<(f64, usize)> {
        if train.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }
        self.check_inputs(train)?;
        let epoch = self.epoch;
        let lr = self.config.schedule.lr(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut keyed_rng(self.config.seed, 0, epoch as u64));

        let (mut total, mut steps) = (0.0, 0);
        for (step, batch) in order.chunks(self.config.batch_size).enumerate() {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &i in batch {
                let s = train[i];
                match &self.config.augment {
                    Some(aug) => {
                        let mut rng = keyed_rng(self.config.seed, AUGMENT_STREAM, ((epoch as u64) << 32) | i as u64);
                        let (a, b) = augment_pair(&s.k_in, &s.k_target, aug, &mut rng)?;
                        inputs.push(a);
                        targets.push(b);
                    }
                    None => {
                        inputs.push(s.k_in.clone());
                        targets.push(s.k_target.clone());
                    }
                }
            }
            let x = stack(&inputs.iter().collect::<Vec<_>>())?;
            let y = stack(&targets.iter().collect::<Vec<_>>())?;

            let tape = Tape::new();
            let dropout_rng = keyed_rng(self.config.seed, DROPOUT_STREAM, ((epoch as u64) << 32) | step as u64);
            let fwd = Forward::new(&tape, &self.model.store, Mode::Train).with_rng(dropout_rng);
            let xv = tape.constant(x);
            let pred = self.model.forward(&fwd, xv)?;
            let loss = l1(&tape, pred, &y, self.config.loss)?;
            let value = tape.value(loss).re()[0];
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, indices: batch.to_vec() });
            }
            let mut grads = fwd.param_grads(&tape.backward(loss)?);
            let updates = fwd.take_updates();
            drop(fwd);
            drop(tape);
            if let Some(max) = self.config.clip_norm {
                clip_grad_norm(&mut grads, max);
            }
            self.optimizer.step(&mut self.model.store, &grads, lr)?;
            self.model.store.apply_updates(updates);
            total += value;
            steps += 1;
        }
        self.epoch += 1;
        Ok((total / steps as f64, steps))
    }

    /// Element-weighted mean loss in inference mode.
    pub fn validation_loss(&self, samples: &[&SliceSample]) -> Result<f64> {
        validation_loss(&self.model, samples, self.config.batch_size, self.config.loss)
    }

    /// Train up to `config.epochs`, validating, logging and checkpointing.
    ///
    /// With `out_dir`, writes `last.kstrip` every epoch, `best.kstrip` on
    /// validation improvement and appends JSON lines to `train.log`.
    pub fn fit(
        &mut self,
        train: &[&SliceSample],
        val: &[&SliceSample],
        out_dir: Option<&Path>,
        mut on_record: impl FnMut(&LogRecord),
    ) -> Result<Vec<LogRecord>> {
        self.check_inputs(val)?;
        let mut log = Vec::new();
        let mut log_file = match out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(OpenOptions::new().create(true).append(true).open(dir.join("train.log"))?)
            }
            None => None,
        };
        while self.epoch < self.config.epochs {
            let epoch = self.epoch;
            let lr = self.config.schedule.lr(epoch);
            let t0 = Instant::now();
            let (loss, steps) = self.train_epoch(train)?;
            let mut records =
                vec![LogRecord { epoch, split: "train".into(), loss, lr, seconds: t0.elapsed().as_secs_f64(), steps }];
            let last = self.epoch == self.config.epochs;
            let mut improved = false;
            if !val.is_empty() && (self.epoch.is_multiple_of(self.config.validate_every) || last) {
                let t1 = Instant::now();
                let vloss = self.validation_loss(val)?;
                records.push(LogRecord {
                    epoch,
                    split: "val".into(),
                    loss: vloss,
                    lr,
                    seconds: t1.elapsed().as_secs_f64(),
                    steps: val.len().div_ceil(self.config.batch_size),
                });
                if self.best_val.is_none_or(|b| vloss < b) {
                    self.best_val = Some(vloss);
                    improved = true;
                }
            }
            if let Some(dir) = out_dir {
                let ck = self.checkpoint()?;
                if improved {
                    ck.write(&dir.join("best.kstrip"))?;
                }
                ck.write(&dir.join("last.kstrip"))?;
            }
            for r in records {
                if let Some(f) = log_file.as_mut() {
                    let line = serde_json::to_string(&r).map_err(|e| Error::Format(e.to_string()))?;
                    writeln!(f, "{line}")?;
                }
                on_record(&r);
                log.push(r);
            }
        }
        Ok(log)
    }
}

pub fn validation_loss(model: &KStripModel, samples: &[&SliceSample], batch_size: usize, kind: LossKind) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    let mut total = 0.0;
    for batch in samples.chunks(batch_size.max(1)) {
        let x = stack(&batch.iter().map(|s| &s.k_in).collect::<Vec<_>>())?;
        let y = stack(&batch.iter().map(|s| &s.k_target).collect::<Vec<_>>())?;
        let tape = Tape::new();
        let fwd = Forward::new(&tape, &model.store, Mode::Eval).frozen();
        let xv = tape.constant(x);
        let pred = model.forward(&fwd, xv)?;
        let loss = l1(&tape, pred, &y, kind)?;
        total += tape.value(loss).re()[0] * batch.len() as f64;
    }
    Ok(total / samples.len() as f64)
}
