use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qvgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qvgc")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(dir: &Path, n: &str, separation: &str) -> String {
    let out = dir.join(format!("d{n}_{separation}.bin"));
    let o = qvgc(&[
        "generate", "--seed", "3", "--n", n, "--separation", separation, "--min-nodes", "10", "--max-nodes", "20", "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path(&out).to_string()
}

fn last_f1(stdout: &[u8]) -> f64 {
    let text = String::from_utf8_lossy(stdout);
    text.lines().last().unwrap().split_whitespace().last().unwrap().parse().unwrap()
}

#[test]
fn generate_is_deterministic_and_summarizes_splits() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    for out in [&a, &b] {
        let o = qvgc(&["generate", "--seed", "7", "--n", "320", "--separation", "0.8", "--out", path(out)]);
        assert!(o.status.success());
        let text = String::from_utf8_lossy(&o.stdout);
        for split in ["train", "val", "test"] {
            assert!(text.lines().any(|l| l.starts_with(split)), "{text}");
        }
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn generate_rejects_tiny_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.bin");
    let o = qvgc(&["generate", "--n", "10", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn serial_run_writes_weighted_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), "60", "1.0");
    let out = dir.path().join("run");
    let o = qvgc(&[
        "run", "--dataset", &ds, "--regime", "serial", "--dim", "8", "--encoding", "amplitude", "--optimizer", "nft",
        "--epochs", "3", "--gnn-epochs", "5", "--out-dir", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    for key in ["weighted_precision", "weighted_recall", "weighted_f1"] {
        assert!(metrics["metrics"][key].is_f64(), "{key}");
    }
    for file in ["manifest.json", "convergence.csv", "pretrain.csv", "model.json"] {
        assert!(out.join(file).exists(), "{file}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("w-F1score"));
}

#[test]
fn entanglement_and_monitor_flags_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), "40", "1.0");
    let out = dir.path().join("run");
    let o = qvgc(&[
        "run", "--dataset", &ds, "--dim", "3", "--zz-reps", "1", "--entanglement", "linear", "--monitor", "val-f1",
        "--epochs", "2", "--gnn-epochs", "3", "--out-dir", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"linear\""), "{manifest}");
    assert!(manifest.contains("\"val_f1\""), "{manifest}");
}

#[test]
fn unsupported_combination_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), "40", "1.0");
    let o = qvgc(&["run", "--dataset", &ds, "--regime", "end-to-end", "--encoding", "amplitude", "--out-dir", path(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classical_run_prints_high_f1_on_separated_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.bin");
    assert!(qvgc(&["generate", "--seed", "5", "--n", "200", "--out", path(&out)]).status.success());
    let o = qvgc(&["run", "--dataset", path(&out), "--regime", "classical", "--seed", "1", "--out-dir", path(&dir.path().join("r"))]);
    assert!(o.status.success());
    let f1 = last_f1(&o.stdout);
    assert!(f1 >= 0.95, "{f1}");
}

#[test]
fn run_replays_bit_exactly_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), "60", "1.0");
    let first = dir.path().join("first");
    let o = qvgc(&[
        "run", "--dataset", &ds, "--regime", "serial", "--dim", "4", "--zz-reps", "1", "--epochs", "3", "--gnn-epochs", "5",
        "--seed", "9", "--out-dir", path(&first),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = dir.path().join("second");
    let o = qvgc(&["run", "--manifest", path(&first.join("manifest.json")), "--out-dir", path(&second)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["metrics.json", "convergence.csv", "model.json"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn grid_writes_one_row_per_point_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), "40", "1.0");
    let first = dir.path().join("grid");
    let o = qvgc(&[
        "grid", "--dataset", &ds, "--regime", "classical", "--gnn-epochs", "2", "--dims", "6,8", "--fractions", "0.5,1.0",
        "--seeds", "1..3", "--threads", "2", "--out-dir", path(&first),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(first.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12);
    assert_eq!(fs::read_dir(first.join("runs")).unwrap().count(), 12);

    let second = dir.path().join("again");
    let o = qvgc(&["grid", "--manifest", path(&first.join("manifest.json")), "--out-dir", path(&second)]);
    assert!(o.status.success());
    assert_eq!(csv, fs::read_to_string(second.join("results.csv")).unwrap());
}

#[test]
fn malformed_grid_spec_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path(), "40", "1.0");
    let out = dir.path().join("grid");
    let o = qvgc(&["grid", "--dataset", &ds, "--dims", "6,x", "--out-dir", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}
