//! Pipeline-level acceptance: end-to-end determinism (criterion 7) and
//! the synthetic-fixture timing budget, exercised through the real
//! binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_heatcast")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// synth -> ingest -> rasterize -> make-dataset -> train -> predict ->
/// evaluate, all under one work dir. Returns paths to the artifacts the
/// determinism contract covers.
fn full_pipeline(root: &Path, tag: &str, seed: &str, epochs: &str) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let work = root.join(tag);
    std::fs::create_dir_all(&work).unwrap();
    run_ok(&work, &["synth", "--days", "30", "--seed", seed, "--out", "fix"]);
    run_ok(
        &work,
        &[
            "ingest",
            "--csv",
            "fix/incidents.csv",
            "--config",
            "fix/config.json",
            "--out",
            "work",
        ],
    );
    run_ok(
        &work,
        &[
            "rasterize",
            "--records",
            "work/records.csv",
            "--config",
            "fix/config.json",
            "--grid-height",
            "16",
            "--grid-width",
            "16",
            "--sigma",
            "2.0",
            "--out",
            "work/rasters",
        ],
    );
    run_ok(
        &work,
        &[
            "make-dataset",
            "--rasters",
            "work/rasters",
            "--config",
            "fix/config.json",
            "--n",
            "6",
            "--scaling",
            "unit",
            "--out",
            "work/dataset.bin",
        ],
    );
    run_ok(
        &work,
        &[
            "train",
            "--dataset",
            "work/dataset.bin",
            "--config",
            "fix/config.json",
            "--model",
            "att-convlstm",
            "--width",
            "reduced",
            "--seed",
            seed,
            "--epochs",
            epochs,
            "--learning-rate",
            "0.002",
            "--out",
            "work/train",
        ],
    );
    run_ok(
        &work,
        &[
            "predict",
            "--checkpoint",
            "work/train/att-convlstm.hgf",
            "--dataset",
            "work/dataset.bin",
            "--t",
            "1",
            "--config",
            "fix/config.json",
            "--out",
            "work/pred",
        ],
    );
    run_ok(
        &work,
        &[
            "evaluate",
            "--checkpoints",
            "work/train/att-convlstm.hgf",
            "--dataset",
            "work/dataset.bin",
            "--config",
            "fix/config.json",
            "--label",
            "synthetic",
            "--out",
            "work/eval",
        ],
    );
    (
        work.join("work/dataset.bin"),
        work.join("work/train/att-convlstm.hgf"),
        work.join("work/eval/report.txt"),
        work.join("work/eval/report.csv"),
    )
}

#[test]
fn acceptance_07_pipeline_determinism_and_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let first = full_pipeline(tmp.path(), "run1", "5", "10");
    let elapsed = started.elapsed().as_secs_f64();
    // the full-pipeline budget on the 30-day fixture
    assert!(
        elapsed < 300.0,
        "full pipeline took {elapsed:.0}s (budget 300s)"
    );

    let second = full_pipeline(tmp.path(), "run2", "5", "10");
    for (a, b, what) in [
        (&first.0, &second.0, "dataset cache"),
        (&first.1, &second.1, "checkpoint"),
        (&first.2, &second.2, "report text"),
        (&first.3, &second.3, "report csv"),
    ] {
        let ba = std::fs::read(a).unwrap();
        let bb = std::fs::read(b).unwrap();
        assert_eq!(ba, bb, "{what} differs between identical runs");
    }

    // a different seed must actually change the checkpoint
    let third = full_pipeline(tmp.path(), "run3", "6", "10");
    let ba = std::fs::read(&first.1).unwrap();
    let bc = std::fs::read(&third.1).unwrap();
    assert_ne!(ba, bc, "different seeds produced identical checkpoints");

    println!(
        "PASS criterion 7 (determinism): identical runs byte-identical (dataset, checkpoint, reports); pipeline {elapsed:.0}s < 300s"
    );
}

#[test]
fn acceptance_07b_gan_checkpoint_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut checkpoints = Vec::new();
    for tag in ["a", "b"] {
        let work = tmp.path().join(tag);
        std::fs::create_dir_all(&work).unwrap();
        run_ok(&work, &["synth", "--days", "12", "--seed", "7", "--out", "fix"]);
        run_ok(
            &work,
            &[
                "ingest",
                "--csv",
                "fix/incidents.csv",
                "--config",
                "fix/config.json",
                "--out",
                "work",
            ],
        );
        run_ok(
            &work,
            &[
                "rasterize",
                "--records",
                "work/records.csv",
                "--config",
                "fix/config.json",
                "--grid-height",
                "16",
                "--grid-width",
                "16",
                "--sigma",
                "2.0",
                "--out",
                "work/rasters",
            ],
        );
        run_ok(
            &work,
            &[
                "make-dataset",
                "--rasters",
                "work/rasters",
                "--config",
                "fix/config.json",
                "--n",
                "2",
                "--scaling",
                "symmetric",
                "--out",
                "work/dataset.bin",
            ],
        );
        run_ok(
            &work,
            &[
                "train",
                "--dataset",
                "work/dataset.bin",
                "--config",
                "fix/config.json",
                "--model",
                "gan",
                "--width",
                "reduced",
                "--seed",
                "7",
                "--epochs",
                "2",
                "--learning-rate",
                "0.001",
                "--out",
                "work/train",
            ],
        );
        checkpoints.push(std::fs::read(work.join("work/train/gan.hgf")).unwrap());
    }
    assert_eq!(
        checkpoints[0], checkpoints[1],
        "adversarial checkpoints differ between identical runs"
    );
    println!("PASS criterion 7 (adversarial determinism): gan checkpoints byte-identical");
}
