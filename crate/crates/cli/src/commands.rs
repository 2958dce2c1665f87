use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use kstrip::data::{
    gen_dataset, patient_ids, read_dataset, select_patients, split_patients, write_dataset, DatasetReader,
    PeripheryConfig, PhantomSpec, SliceSample, Split, MIN_PATIENTS,
};
use kstrip::evaluation::{
    binarize_with, evaluate, log_kspace_u8, magnitude_u8, mask_u8, per_slice_csv, phase_u8, slice_panel,
    summary_csv, to_image, write_gray_png, EvalConfig, Predictor, Reference, SegMetrics, TargetOracle,
};
use kstrip::model::{Checkpoint, KStripConfig, KStripModel};
use kstrip::training::{LogRecord, Trainer, TrainConfig};

use crate::manifest::RunManifest;
use crate::{CliError, EvalArgs, GenDataArgs, InferArgs, InspectArgs, ReferenceName, SplitName, TrainArgs};

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn to_json(v: impl serde::Serialize) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn load_dataset(path: &Path) -> CliResult<Vec<SliceSample>> {
    read_dataset(path).map_err(|e| match e {
        kstrip::Error::Io(io) => CliError::Runtime(format!("cannot read dataset {}: {io}", path.display())),
        other => other.into(),
    })
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Checkpoint::read(path).map_err(|e| match e {
        kstrip::Error::Io(io) => CliError::Runtime(format!("cannot read checkpoint {}: {io}", path.display())),
        other => other.into(),
    })
}

fn print_split(split: &Split) {
    let (tr, va, te) = split.sizes();
    println!("split (patients): train {tr}, val {va}, test {te}");
}

pub fn gen_data(a: &GenDataArgs) -> CliResult<()> {
    if a.patients < MIN_PATIENTS {
        return usage(format!("--patients must be at least {MIN_PATIENTS} for a train/val/test split"));
    }
    if a.slices == 0 {
        return usage("--slices must be at least 1");
    }
    let spec = PhantomSpec::with_size(a.size, a.seed);
    spec.validate()?;
    let config = json!({ "patients": a.patients, "slices": a.slices, "size": a.size, "phantom": to_json(&spec) });
    let mut manifest = RunManifest::start("gen-data", config, Some(a.seed));
    let t0 = Instant::now();
    let samples = gen_dataset(&spec, a.patients, a.slices)?;
    let split = split_patients(&patient_ids(&samples), a.seed)?;
    let dir = parent_dir(&a.output);
    std::fs::create_dir_all(&dir)?;
    write_dataset(&samples, &a.output)?;
    println!("wrote {} samples ({} patients x {} slices, {}x{}) to {}", samples.len(), a.patients, a.slices, a.size, a.size, a.output.display());
    print_split(&split);
    manifest.artifacts.push(a.output.clone());
    manifest.results = json!({ "samples": samples.len(), "split": split.sizes(), "seconds": t0.elapsed().as_secs_f64() });
    manifest.finish(&dir)?;
    Ok(())
}

fn model_config(a: &TrainArgs) -> KStripConfig {
    let mut c = if a.desk { KStripConfig::desk() } else { KStripConfig::default() };
    if let Some(s) = a.size {
        c.input_size = (s, s);
        c.kspace_scale = s as f64;
    }
    c.base_channels = a.base_channels.unwrap_or(c.base_channels);
    c.levels = a.levels.unwrap_or(c.levels);
    c.blocks_per_level = a.blocks.unwrap_or(c.blocks_per_level);
    c.decoder_blocks = a.decoder_blocks.unwrap_or(c.decoder_blocks);
    c.bottleneck_channels = a.bottleneck.unwrap_or(c.bottleneck_channels);
    c.dropout = a.dropout.unwrap_or(c.dropout);
    c
}

fn train_config(a: &TrainArgs, size: usize) -> TrainConfig {
    let mut c = if a.desk { TrainConfig::desk() } else { TrainConfig::default() };
    c.seed = a.seed;
    c.epochs = a.epochs.unwrap_or(c.epochs);
    c.batch_size = a.batch_size.unwrap_or(c.batch_size);
    c.schedule.initial = a.lr.unwrap_or(c.schedule.initial);
    c.schedule.period = a.lr_period.unwrap_or(c.schedule.period);
    c.clip_norm = a.clip_norm.or(c.clip_norm);
    c.augment = if a.no_augment { None } else { Some(PeripheryConfig::for_size(size)) };
    c
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let samples = load_dataset(&a.data)?;
    let Some(first) = samples.first() else {
        return usage("dataset is empty");
    };
    let (h, w) = first.brain_mask.shape();
    let mut trainer = match &a.resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            let mut t = Trainer::from_checkpoint(&ck, None)?;
            if let Some(e) = a.epochs {
                t.config.epochs = e;
            }
            t
        }
        None => {
            let model = KStripModel::build(model_config(a), a.seed)?;
            Trainer::new(model, train_config(a, h.min(w)))?
        }
    };
    if trainer.model.config.input_size != (h, w) {
        return usage(format!(
            "dataset slices are {h}x{w} but the model expects {}x{}",
            trainer.model.config.input_size.0, trainer.model.config.input_size.1
        ));
    }
    let split = split_patients(&patient_ids(&samples), trainer.config.seed)?;
    print_split(&split);
    let train = select_patients(&samples, &split.train);
    let val = select_patients(&samples, &split.val);
    println!("slices: train {}, val {}; {} trainable scalars", train.len(), val.len(), trainer.model.store.trainable_scalars());

    std::fs::create_dir_all(&a.out)?;
    let log_path = a.out.join("train.log");
    if a.resume.is_none() && log_path.exists() {
        std::fs::remove_file(&log_path)?;
    }
    let config = json!({
        "data": a.data,
        "resume": a.resume,
        "model": to_json(&trainer.model.config),
        "train": to_json(&trainer.config),
        "start_epoch": trainer.epoch,
    });
    let mut manifest = RunManifest::start("train", config, Some(trainer.config.seed));
    let t0 = Instant::now();
    let quiet = a.quiet;
    let log = trainer.fit(&train, &val, Some(&a.out), |r: &LogRecord| {
        if !quiet {
            println!("epoch {:>3} {:<5} loss {:.6} lr {:.2e} ({:.1}s)", r.epoch, r.split, r.loss, r.lr, r.seconds);
        }
    })?;
    let seconds = t0.elapsed().as_secs_f64();
    println!("finished {} epochs in {seconds:.1}s; best val loss {:?}", trainer.epoch, trainer.best_val);
    manifest.artifacts = ["best.kstrip", "last.kstrip", "train.log"]
        .iter()
        .map(|n| a.out.join(n))
        .filter(|p| p.exists())
        .collect();
    manifest.results = json!({
        "epochs_completed": trainer.epoch,
        "epochs_this_run": log.iter().filter(|r| r.split == "train").count(),
        "best_val_loss": trainer.best_val,
        "seconds": seconds,
    });
    manifest.finish(&a.out)?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let samples = load_dataset(&a.data)?;
    let (model, train_seed) = match &a.checkpoint {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            let seed = ck.meta.get("train").and_then(|t| t.get("seed")).and_then(|s| s.as_u64());
            (Some(ck.into_model()?), seed)
        }
        None => (None, None),
    };
    let seed = a.seed.or(train_seed).unwrap_or(0);
    let split = split_patients(&patient_ids(&samples), seed)?;
    let ids = match a.split {
        SplitName::Train => split.train.clone(),
        SplitName::Val => split.val.clone(),
        SplitName::Test => split.test.clone(),
        SplitName::All => patient_ids(&samples),
    };
    let subset = select_patients(&samples, &ids);
    if let (Some(m), Some(s)) = (&model, subset.first()) {
        if m.config.input_size != s.brain_mask.shape() {
            return usage(format!("dataset slices are {:?} but the model expects {:?}", s.brain_mask.shape(), m.config.input_size));
        }
    }
    let cfg = EvalConfig {
        threshold_factor: a.threshold,
        min_brain_pixels: a.min_brain_pixels,
        reference: match a.reference {
            ReferenceName::Generator => Reference::GeneratorMask,
            ReferenceName::Target => Reference::BinarizedTarget,
        },
        ..EvalConfig::default()
    };
    if !(cfg.threshold_factor > 0.0 && cfg.threshold_factor.is_finite()) {
        return usage("--threshold must be positive");
    }
    let split_name = format!("{:?}", a.split).to_lowercase();
    let config = json!({
        "data": a.data,
        "checkpoint": a.checkpoint,
        "oracle": a.oracle,
        "split": split_name,
        "eval": to_json(&cfg),
    });
    let mut manifest = RunManifest::start("eval", config, Some(seed));
    let predictor: &dyn Predictor = match &model {
        Some(m) => m,
        None => &TargetOracle,
    };
    let t0 = Instant::now();
    let results = evaluate(predictor, &subset, &cfg)?;
    let seconds = t0.elapsed().as_secs_f64();
    let metrics = SegMetrics::from_slices(&results);

    std::fs::create_dir_all(&a.out)?;
    let csv = summary_csv(&[(a.name.as_str(), split_name.as_str(), &metrics)]);
    let metrics_path = a.out.join("metrics.csv");
    std::fs::write(&metrics_path, &csv)?;
    print!("{csv}");
    println!("mean phase error on brain pixels: {:.4} rad", metrics.phase_error);
    manifest.artifacts.push(metrics_path);
    if a.per_slice {
        let p = a.out.join("per_slice.csv");
        std::fs::write(&p, per_slice_csv(&results))?;
        manifest.artifacts.push(p);
    }
    let n_panels = a.panels.min(subset.len());
    if n_panels > 0 {
        let preds = predictor.predict(&subset[..n_panels])?;
        for (i, (s, p)) in subset.iter().zip(&preds).enumerate() {
            let path = a.out.join(format!("panel_{i:03}_p{}_s{}.png", s.patient_id, s.slice_idx));
            write_gray_png(&slice_panel(s, p, a.threshold)?, &path)?;
            manifest.artifacts.push(path);
        }
    }
    manifest.results = json!({
        "metrics": to_json(&metrics),
        "slices_scored": results.len(),
        "seconds": seconds,
        "seconds_per_slice": seconds / results.len() as f64,
    });
    manifest.finish(&a.out)?;
    Ok(())
}

fn read_slice(path: &Path, index: usize) -> CliResult<SliceSample> {
    let mut reader = DatasetReader::open(path).map_err(|e| match e {
        kstrip::Error::Io(io) => CliError::Runtime(format!("cannot read dataset {}: {io}", path.display())),
        other => other.into(),
    })?;
    if index >= reader.len() {
        return usage(format!("--index {index} out of range; dataset has {} slices", reader.len()));
    }
    Ok(reader.get(index)?)
}

/// Real plane then imaginary plane, little-endian f64.
fn raw_planes(t: &kstrip::ComplexTensor) -> Vec<u8> {
    t.re().iter().chain(t.im()).flat_map(|v| v.to_le_bytes()).collect()
}

pub fn infer(a: &InferArgs) -> CliResult<()> {
    let model = load_checkpoint(&a.checkpoint)?.into_model()?;
    let sample = read_slice(&a.data, a.index)?;
    if model.config.input_size != sample.brain_mask.shape() {
        return usage(format!("slice is {:?} but the model expects {:?}", sample.brain_mask.shape(), model.config.input_size));
    }
    let config = json!({ "checkpoint": a.checkpoint, "data": a.data, "index": a.index, "threshold": a.threshold });
    let mut manifest = RunManifest::start("infer", config, None);
    let t0 = Instant::now();
    let pred = Predictor::predict(&model, &[&sample])?.remove(0);
    let seconds = t0.elapsed().as_secs_f64();
    let image = to_image(&pred)?;
    let mask = binarize_with(&image, a.threshold)?;

    std::fs::create_dir_all(&a.out)?;
    let raw = a.out.join("pred_kspace.f64");
    std::fs::write(&raw, raw_planes(&pred))?;
    manifest.artifacts.push(raw);
    for (name, img) in [("magnitude.png", magnitude_u8(&image)?), ("phase.png", phase_u8(&image)?), ("mask.png", mask_u8(&mask))] {
        let p = a.out.join(name);
        write_gray_png(&img, &p)?;
        manifest.artifacts.push(p);
    }
    println!("slice {} (patient {}, slice {}): {} mask pixels in {seconds:.3}s", a.index, sample.patient_id, sample.slice_idx, mask.count());
    manifest.results = json!({
        "shape": pred.shape(),
        "layout": "f64 little-endian, real plane then imaginary plane, centred k-space",
        "mask_pixels": mask.count(),
        "seconds_per_slice": seconds,
    });
    manifest.finish(&a.out)?;
    Ok(())
}

pub fn inspect(a: &InspectArgs) -> CliResult<()> {
    let sample = read_slice(&a.data, a.index)?;
    let config = json!({ "data": a.data, "index": a.index });
    let mut manifest = RunManifest::start("inspect", config, None);
    std::fs::create_dir_all(&a.out)?;
    let outputs = [
        ("kspace.png", log_kspace_u8(&sample.k_in)?),
        ("image.png", magnitude_u8(&to_image(&sample.k_in)?)?),
        ("target_kspace.png", log_kspace_u8(&sample.k_target)?),
        ("target_image.png", magnitude_u8(&to_image(&sample.k_target)?)?),
    ];
    for (name, img) in outputs {
        let p = a.out.join(name);
        write_gray_png(&img, &p)?;
        manifest.artifacts.push(p);
    }
    println!("slice {} (patient {}, slice {}): {} brain pixels", a.index, sample.patient_id, sample.slice_idx, sample.brain_pixels);
    manifest.results = json!({ "patient": sample.patient_id, "slice": sample.slice_idx, "brain_pixels": sample.brain_pixels });
    manifest.finish(&a.out)?;
    Ok(())
}
