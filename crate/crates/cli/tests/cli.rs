//! Command-level behavior: exit codes, machine-parseable errors, and
//! the per-command output contracts.

use std::path::Path;
use std::process::{Command, Output};

use heatcast::checkpoint;
use heatcast::dataset::ScalingMode;
use heatcast::models::{build_forecaster, ModelConfig, ModelKind, ModelMeta};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_heatcast")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output, ctx: &str) {
    assert!(
        out.status.success(),
        "{ctx} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Build a small raster directory + dataset via the binary.
fn prepare_dataset(dir: &Path, days: u32, n: u32, scaling: &str) {
    assert_ok(
        &run(dir, &["synth", "--days", &days.to_string(), "--seed", "3", "--out", "fix"]),
        "synth",
    );
    assert_ok(
        &run(
            dir,
            &[
                "ingest",
                "--csv",
                "fix/incidents.csv",
                "--config",
                "fix/config.json",
                "--out",
                "work",
            ],
        ),
        "ingest",
    );
    assert_ok(
        &run(
            dir,
            &[
                "rasterize",
                "--records",
                "work/records.csv",
                "--config",
                "fix/config.json",
                "--grid-height",
                "8",
                "--grid-width",
                "8",
                "--sigma",
                "1.5",
                "--out",
                "work/rasters",
            ],
        ),
        "rasterize",
    );
    assert_ok(
        &run(
            dir,
            &[
                "make-dataset",
                "--rasters",
                "work/rasters",
                "--config",
                "fix/config.json",
                "--n",
                &n.to_string(),
                "--scaling",
                scaling,
                "--out",
                "work/dataset.bin",
            ],
        ),
        "make-dataset",
    );
}

#[test]
fn config_errors_exit_2_with_machine_parseable_line() {
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 10, 2, "unit");
    let out = run(
        tmp.path(),
        &[
            "train",
            "--dataset",
            "work/dataset.bin",
            "--model",
            "transformer",
            "--out",
            "work/train",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().next().unwrap();
    assert!(
        line.starts_with("error kind=config code=2 msg=\""),
        "unexpected error line: {line}"
    );
    assert!(stderr.lines().count() == 1, "error must be a single line");
}

#[test]
fn config_validation_enumerates_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("bad.json"),
        "{\"sigma\": -2.0, \"n\": 20, \"model\": \"nope\", \"grid_height\": 13}",
    )
    .unwrap();
    let out = run(
        tmp.path(),
        &["synth", "--days", "5", "--config", "bad.json", "--out", "fix"],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for needle in ["sigma", "n:", "model", "grid_height"] {
        assert!(stderr.contains(needle), "missing {needle} in: {stderr}");
    }
    // invalid config leaves no side effects behind
    assert!(!tmp.path().join("fix").exists());
}

#[test]
fn missing_input_files_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["ingest", "--csv", "nope.csv", "--schema", "synthetic", "--out", "work"],
    );
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error kind=data code=3"));
}

#[test]
fn make_dataset_reports_window_count() {
    // 10 days with n=6 leaves exactly 4 windows
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 10, 6, "unit");
    let cache =
        heatcast::dataset::DatasetCache::read_file(&tmp.path().join("work/dataset.bin")).unwrap();
    assert_eq!(cache.samples.len(), 4);
    assert_eq!(cache.n, 6);
}

#[test]
fn train_zero_epochs_writes_initialization_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 10, 2, "unit");
    let out = run(
        tmp.path(),
        &[
            "train",
            "--dataset",
            "work/dataset.bin",
            "--model",
            "td-enc-dec",
            "--width",
            "reduced",
            "--seed",
            "21",
            "--epochs",
            "0",
            "--out",
            "work/train",
        ],
    );
    assert_ok(&out, "train epochs=0");

    let (meta_json, records) =
        checkpoint::read_file(&tmp.path().join("work/train/td-enc-dec.hgf")).unwrap();
    let meta = ModelMeta::from_json(&meta_json).unwrap();
    assert_eq!(meta.kind, ModelKind::TdEncDec);

    // seed 21 initialization, untouched by training
    let mut cfg = ModelConfig::reduced_with(2, 8, 8, ScalingMode::Unit);
    cfg.n = 2;
    let reference = build_forecaster(ModelKind::TdEncDec, &cfg, 21).unwrap();
    assert_eq!(records.len(), reference.params().len());
    for ((name, tensor), p) in records.iter().zip(reference.params().iter()) {
        assert_eq!(name, &p.name);
        for (a, b) in tensor.data().iter().zip(p.value.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "parameter {name} changed");
        }
    }
}

#[test]
fn gan_rejects_unit_scaled_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 10, 2, "unit");
    let out = run(
        tmp.path(),
        &[
            "train",
            "--dataset",
            "work/dataset.bin",
            "--model",
            "gan",
            "--width",
            "reduced",
            "--out",
            "work/train",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("symmetric"));
}

#[test]
fn predict_writes_pgm_and_png() {
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 10, 2, "unit");
    assert_ok(
        &run(
            tmp.path(),
            &[
                "train",
                "--dataset",
                "work/dataset.bin",
                "--model",
                "convlstm",
                "--width",
                "reduced",
                "--seed",
                "4",
                "--epochs",
                "1",
                "--learning-rate",
                "0.001",
                "--out",
                "work/train",
            ],
        ),
        "train",
    );
    let out = run(
        tmp.path(),
        &[
            "predict",
            "--checkpoint",
            "work/train/convlstm.hgf",
            "--dataset",
            "work/dataset.bin",
            "--t",
            "2",
            "--out",
            "work/pred",
        ],
    );
    assert_ok(&out, "predict");
    // prediction is for day t + n = 4
    let pgm = std::fs::read(tmp.path().join("work/pred/pred_day00004.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5"));
    let png = std::fs::read(tmp.path().join("work/pred/pred_day00004.png")).unwrap();
    assert_eq!(&png[..4], &[0x89, b'P', b'N', b'G']);

    // missing sample index is a data error
    let out = run(
        tmp.path(),
        &[
            "predict",
            "--checkpoint",
            "work/train/convlstm.hgf",
            "--dataset",
            "work/dataset.bin",
            "--t",
            "99",
            "--out",
            "work/pred",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn evaluate_emits_text_and_exact_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 12, 2, "unit");
    assert_ok(
        &run(
            tmp.path(),
            &[
                "train",
                "--dataset",
                "work/dataset.bin",
                "--model",
                "td-enc-dec",
                "--width",
                "reduced",
                "--seed",
                "4",
                "--epochs",
                "1",
                "--learning-rate",
                "0.001",
                "--out",
                "work/train",
            ],
        ),
        "train",
    );
    let out = run(
        tmp.path(),
        &[
            "evaluate",
            "--checkpoints",
            "work/train/td-enc-dec.hgf",
            "--dataset",
            "work/dataset.bin",
            "--label",
            "synthetic",
            "--out",
            "work/eval",
        ],
    );
    assert_ok(&out, "evaluate");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("TD-Conv-Enc-Dec"));
    let csv = std::fs::read_to_string(tmp.path().join("work/eval/report.csv")).unwrap();
    assert!(csv.starts_with("method,mse,mae\n"));
    assert!(tmp.path().join("work/eval/report.txt").exists());
}

#[test]
fn checkpoint_every_writes_periodic_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 10, 2, "unit");
    assert_ok(
        &run(
            tmp.path(),
            &[
                "train",
                "--dataset",
                "work/dataset.bin",
                "--model",
                "convlstm",
                "--width",
                "reduced",
                "--seed",
                "4",
                "--epochs",
                "4",
                "--learning-rate",
                "0.001",
                "--checkpoint-every",
                "2",
                "--out",
                "work/train",
            ],
        ),
        "train with periodic checkpoints",
    );
    assert!(tmp.path().join("work/train/checkpoint_epoch00002.hgf").exists());
    assert!(tmp.path().join("work/train/checkpoint_epoch00004.hgf").exists());
    assert!(!tmp.path().join("work/train/checkpoint_epoch00003.hgf").exists());
}

#[test]
fn diverging_training_exits_4_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    prepare_dataset(tmp.path(), 10, 2, "unit");
    // an absurd learning rate overflows the forward pass within a few
    // steps; the run must abort as a numerical failure, not a panic
    let out = run(
        tmp.path(),
        &[
            "train",
            "--dataset",
            "work/dataset.bin",
            "--model",
            "convlstm",
            "--width",
            "reduced",
            "--seed",
            "4",
            "--epochs",
            "5",
            "--learning-rate",
            "1e150",
            "--out",
            "work/train",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error kind=numerical code=4"));
    assert!(
        stderr.contains("epoch") || stderr.contains("parameter"),
        "failure should name the epoch/batch or parameter: {stderr}"
    );
}

#[test]
fn ingest_reports_skips_on_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("data.csv"),
        "date,lat,lon\n2024-01-01,39.1,-84.5\n2024-01-02,,-84.5\n2024-01-03,39.2,-84.4\n2024-01-04,39.15,-84.45\n",
    )
    .unwrap();
    let out = run(
        tmp.path(),
        &[
            "ingest",
            "--csv",
            "data.csv",
            "--schema",
            "synthetic",
            "--end-date",
            "2024-01-31",
            "--out",
            "work",
        ],
    );
    assert_ok(&out, "ingest");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let summary: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(summary["rows"], 4);
    assert_eq!(summary["records"], 3);
    assert_eq!(summary["skipped"]["missing_coord"], 1);
    let records = std::fs::read_to_string(tmp.path().join("work/records.csv")).unwrap();
    assert!(records.starts_with("day,lat,lon\n"));
    assert_eq!(records.lines().count(), 4);
}
