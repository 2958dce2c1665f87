use std::path::Path;
use std::process::{Command, Output};

use kstrip::ctensor::{fft2, fftshift};
use kstrip::data::{write_dataset, SliceSample};
use kstrip::mask::BinaryMask;
use kstrip::ComplexTensor;

fn kstrip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstrip")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kstrip(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    kstrip(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const TINY: &str = "size = 16\nbase_channels = 2\nlevels = 1\nblocks = 1\ndecoder_blocks = 1\nbottleneck = 4\nbatch_size = 4\nquiet = true\n";

/// 10 patients x 2 slices at 16x16 plus a tiny-model config file.
fn small_setup(dir: &Path) -> (String, String) {
    let data = dir.join("d.ksds");
    ok(&["gen-data", "--patients", "10", "--slices", "2", "--size", "16", "--seed", "3", "-o", p(&data)]);
    let cfg = dir.join("tiny.cfg");
    std::fs::write(&cfg, TINY).unwrap();
    (p(&data).to_string(), p(&cfg).to_string())
}

#[test]
fn gen_data_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a/d.ksds"), dir.path().join("b/d.ksds"));
    let args = |o: &Path| {
        ["gen-data", "--patients", "20", "--slices", "40", "--size", "64", "--seed", "7", "-o"]
            .iter()
            .map(|s| s.to_string())
            .chain([p(o).to_string()])
            .collect::<Vec<_>>()
    };
    let out = ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.contains("wrote 800 samples"), "{out}");
    assert!(out.contains("train 14, val 4, test 2"), "{out}");
    ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let m = manifest(&dir.path().join("a"));
    assert_eq!(m["command"], "gen-data");
    assert_eq!(m["results"]["samples"], 800);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ksds");
    assert_eq!(code(&["gen-data", "--patients", "5", "-o", p(&out)]), 2);
    assert_eq!(code(&["gen-data", "--size", "48", "-o", p(&out)]), 2);
    assert_eq!(code(&["gen-data", "--bogus"]), 2);
    assert_eq!(code(&["train"]), 2);
    assert!(!out.exists());
}

#[test]
fn missing_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ksds");
    let out = kstrip(&["eval", "--oracle", "--data", p(&missing), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.ksds"));
    assert_eq!(code(&["inspect", "--data", p(&missing), "--out", p(dir.path())]), 1);
}

#[test]
fn help_lists_defaults() {
    for sub in ["gen-data", "train", "eval", "infer", "inspect"] {
        let help = ok(&[sub, "--help"]);
        assert!(help.contains("--config"), "{sub}");
        if sub != "inspect" {
            assert!(help.contains("[default:"), "{sub}: {help}");
        }
    }
}

#[test]
fn train_artifacts_resume_and_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = small_setup(dir.path());
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec!["train", "--config", &cfg, "--data", &data, "--out", p(out), "--seed", "5"];
        args.extend_from_slice(extra);
        ok(&args)
    };
    let one = dir.path().join("one");
    run(&one, &["--epochs", "1"]);
    for f in ["best.kstrip", "last.kstrip", "train.log", "manifest.json"] {
        assert!(one.join(f).exists(), "{f}");
    }
    let log = std::fs::read_to_string(one.join("train.log")).unwrap();
    let splits: Vec<String> = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["split"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(splits, ["train", "val"]);
    // flag beats the config file's batch_size = 4
    run(&dir.path().join("bs"), &["--epochs", "1", "--batch-size", "7"]);
    let log = std::fs::read_to_string(dir.path().join("bs/train.log")).unwrap();
    assert!(log.lines().next().unwrap().contains("\"steps\":2"), "{log}");

    let full = dir.path().join("full");
    run(&full, &["--epochs", "3"]);
    let last = one.join("last.kstrip");
    ok(&["train", "--data", &data, "--out", p(&one), "--resume", p(&last), "--epochs", "3"]);
    assert_eq!(std::fs::read(full.join("last.kstrip")).unwrap(), std::fs::read(&last).unwrap());
    assert_eq!(std::fs::read_to_string(one.join("train.log")).unwrap().lines().count(), 6);

    assert_eq!(code(&["train", "--data", &data, "--out", p(&dir.path().join("desk")), "--desk", "--epochs", "1"]), 2);
}

#[test]
fn eval_oracle_reports_perfect_dice_and_panels() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = small_setup(dir.path());
    let out = dir.path().join("ev");
    let args = [
        "eval", "--oracle", "--data", &data, "--out", p(&out), "--split", "all", "--reference", "target",
        "--min-brain-pixels", "0", "--panels", "3", "--per-slice",
    ];
    ok(&args);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dataset,split,n,dice,dhd,acc,sens,spec,failures"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[3].parse::<f64>().unwrap(), 100.0);
    let pngs = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
    assert_eq!(pngs, 3);
    assert!(out.join("per_slice.csv").exists());

    let again = dir.path().join("ev2");
    let mut args2 = args.to_vec();
    args2[5] = p(&again);
    ok(&args2);
    assert_eq!(csv, std::fs::read_to_string(again.join("metrics.csv")).unwrap());
}

#[test]
fn infer_is_deterministic_and_reports_timing() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = small_setup(dir.path());
    let run = dir.path().join("run");
    ok(&["train", "--config", &cfg, "--data", &data, "--out", p(&run), "--epochs", "1"]);
    let ck = run.join("last.kstrip");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["infer", "--checkpoint", p(&ck), "--data", &data, "--index", "3", "--out", p(out)]);
    }
    for f in ["magnitude.png", "phase.png", "mask.png", "pred_kspace.f64"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(std::fs::metadata(a.join("pred_kspace.f64")).unwrap().len(), 2 * 16 * 16 * 8);
    assert!(manifest(&a)["results"]["seconds_per_slice"].as_f64().is_some());
    assert_eq!(code(&["infer", "--checkpoint", p(&ck), "--data", &data, "--index", "20", "--out", p(&a)]), 2);
}

#[test]
fn inspect_constant_image_has_single_bright_centre() {
    let dir = tempfile::tempdir().unwrap();
    let n = 16;
    let img = ComplexTensor::from_parts(&[1, n, n], vec![0.5; n * n], vec![0.0; n * n]).unwrap();
    let k = fftshift(&fft2(&img).unwrap()).unwrap();
    let mask = BinaryMask::from_fn(n, n, |_, _| true);
    let sample = SliceSample {
        k_in: k.clone(),
        k_target: k,
        brain_pixels: mask.count(),
        brain_mask: mask,
        patient_id: 0,
        slice_idx: 0,
    };
    let data = dir.path().join("c.ksds");
    write_dataset(&[sample], &data).unwrap();
    let out = dir.path().join("in");
    ok(&["inspect", "--data", p(&data), "--out", p(&out)]);
    let png = std::fs::read(out.join("kspace.png")).unwrap();
    let decoder = png::Decoder::new(png.as_slice());
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size()];
    reader.next_frame(&mut buf).unwrap();
    let bright: Vec<usize> = (0..n * n).filter(|&i| buf[i] > 0).collect();
    assert_eq!(bright, vec![(n / 2) * n + n / 2]);
    assert_eq!(code(&["inspect", "--data", p(&data), "--index", "1", "--out", p(&out)]), 2);
}

#[test]
fn bad_thread_count_is_usage() {
    let out = Command::new(env!("CARGO_BIN_EXE_kstrip"))
        .args(["inspect", "--data", "x", "--out", "y"])
        .env("KSTRIP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
