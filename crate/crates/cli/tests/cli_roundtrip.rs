//! End-to-end CLI behavior: manifest determinism, dataset generation,
//! checkpoint evaluation, and exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bipde() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bipde"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("config.txt");
    fs::write(&p, body).unwrap();
    p
}

const TINY_BURGERS: &str = "kind = burgers_sweep\nnx = 24\nepochs = 40\nt_final = 0.02\n";

#[test]
fn manifest_rerun_reproduces_csv_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_BURGERS);
    let out1 = dir.path().join("run1");
    let status = bipde()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out1)
        .status()
        .unwrap();
    assert!(status.success());

    // Re-run from the emitted manifest, not the original config.
    let out2 = dir.path().join("run2");
    let status = bipde()
        .args(["train", "--config"])
        .arg(out1.join("manifest.txt"))
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert!(status.success());

    let csv1 = fs::read(out1.join("metrics.csv")).unwrap();
    let csv2 = fs::read(out2.join("metrics.csv")).unwrap();
    assert_eq!(csv1, csv2, "manifest re-run must reproduce the CSV exactly");
    assert!(!csv1.is_empty());
}

#[test]
fn generate_then_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    // Train a small encoder on the 1D inverse problem.
    let cfg = write_config(
        dir.path(),
        "kind = poisson_inverse_1d\nnx = 24\nn_data = 40\nn_test = 20\nepochs = 30\nbatch = 20\nencoder = dense(24,20,relu) dense(20,2,sigmoid)\n",
    );
    let train_out = dir.path().join("train");
    let status = bipde()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&train_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(train_out.join("checkpoint.bpnn").exists());

    // Generate a matching dataset.
    let gen_cfg = write_config(
        dir.path(),
        "kind = poisson_inverse_1d\nnx = 24\nn_data = 15\nseed = 99\n",
    );
    let data_out = dir.path().join("data");
    let status = bipde()
        .args(["generate", "--config"])
        .arg(&gen_cfg)
        .arg("--out")
        .arg(&data_out)
        .status()
        .unwrap();
    assert!(status.success());
    let dataset = data_out.join("ensemble_1d.bpds");
    assert!(dataset.exists());

    // Evaluate the checkpoint on it.
    let eval_out = dir.path().join("eval");
    let output = bipde()
        .args(["eval", "--checkpoint"])
        .arg(train_out.join("checkpoint.bpnn"))
        .arg("--data")
        .arg(&dataset)
        .arg("--out")
        .arg(&eval_out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let preds = fs::read_to_string(eval_out.join("predictions.csv")).unwrap();
    // Header plus one row per sample.
    assert_eq!(preds.lines().count(), 16);
    let metrics = fs::read_to_string(eval_out.join("metrics.csv")).unwrap();
    assert!(metrics.contains("eval_poisson_inverse_1d"));
}

#[test]
fn sweep_writes_one_row_per_cell_and_reruns_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_BURGERS);
    let out = dir.path().join("sweep");
    let status = bipde()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--axis", "nx=16,24", "--out"])
        .arg(&out)
        .args(["--workers", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    // Header + (nu, gamma) rows for each of the two cells.
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("nx=16"));
    assert!(csv.contains("nx=24"));

    // Manifest carries the axes; re-running without --axis reproduces it.
    let out2 = dir.path().join("sweep2");
    let status = bipde()
        .args(["sweep", "--config"])
        .arg(out.join("manifest.txt"))
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        fs::read(out.join("metrics.csv")).unwrap(),
        fs::read(out2.join("metrics.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kind = nonsense\n");
    let status = bipde()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Missing file is also a configuration problem.
    let status = bipde()
        .args(["train", "--config"])
        .arg(dir.path().join("missing.txt"))
        .arg("--out")
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    // A wildly unstable time step blows the solution up.
    let cfg = write_config(
        dir.path(),
        "kind = burgers_sweep\nnx = 24\ndt = 0.5\nt_final = 10\nepochs = 2\n",
    );
    let status = bipde()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn empty_sweep_cell_failures_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    // nx = 4 is below the compact scheme's minimum: that cell fails, the
    // other succeeds, and the sweep still exits zero.
    let cfg = write_config(dir.path(), TINY_BURGERS);
    let out = dir.path().join("sweep");
    let status = bipde()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--axis", "nx=4,24", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let failures = fs::read_to_string(out.join("failures.txt")).unwrap();
    assert!(failures.contains("nx=4"));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.contains("nx=24"));
}
