use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chanprune::data::{load_dataset, synth_generate, SynthConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chanprune"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn chanprune");
    if out.status.code() == Some(101) {
        panic!("chanprune panicked: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().expect("exit code")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Small dataset and a briefly trained baseline in `dir/base`.
fn baseline(dir: &Path) {
    ok(
        dir,
        &["synth", "--per-class", "30", "--length", "32", "--out", "d.csv"],
    );
    ok(
        dir,
        &["train", "--data", "d.csv", "--out", "base", "--max-epochs", "3"],
    );
}

#[test]
fn synth_defaults_line_count() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["synth", "--out", "d.csv"]);
    let text = std::fs::read_to_string(t.path().join("d.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 400);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 1 + 178);
}

#[test]
fn synth_is_deterministic_and_round_trips() {
    let t = tempfile::tempdir().unwrap();
    let args = [
        "synth",
        "--noise",
        "0",
        "--seed",
        "7",
        "--classes",
        "4",
        "--per-class",
        "5",
    ];
    ok(t.path(), &[&args[..], &["--out", "a.csv"]].concat());
    ok(t.path(), &[&args[..], &["--out", "b.csv"]].concat());
    let a = std::fs::read(t.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(t.path().join("b.csv")).unwrap());

    ok(
        t.path(),
        &[
            "synth",
            "--per-class",
            "100",
            "--length",
            "20",
            "--seed",
            "3",
            "--out",
            "c.csv",
        ],
    );
    let want = synth_generate(&SynthConfig {
        n_per_class: 100,
        len: 20,
        classes: 3,
        noise_sigma: 0.3,
        seed: 3,
    })
    .unwrap();
    assert_eq!(load_dataset(t.path().join("c.csv")).unwrap(), want);
}

#[test]
fn usage_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(t.path(), &["synth", "--classes", "1", "--out", "x.csv"]), 2);
    assert_eq!(code(t.path(), &["synth", "--bogus"]), 2);
    assert_eq!(code(t.path(), &["frobnicate"]), 2);
    assert_eq!(code(t.path(), &["synth", "--length", "4", "--out", "x.csv"]), 2);
}

#[test]
fn train_caps_epochs_and_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    ok(
        p,
        &["synth", "--per-class", "30", "--length", "32", "--out", "d.csv"],
    );
    ok(
        p,
        &["train", "--data", "d.csv", "--out", "one", "--max-epochs", "1"],
    );
    let h = std::fs::read_to_string(p.join("one/history.csv")).unwrap();
    assert_eq!(h.lines().count(), 2);

    ok(
        p,
        &["train", "--data", "d.csv", "--out", "a", "--max-epochs", "4"],
    );
    ok(
        p,
        &["train", "--data", "d.csv", "--out", "b", "--max-epochs", "4"],
    );
    for f in [
        "history.csv",
        "params.bin",
        "split.json",
        "scaler.json",
        "manifest.json",
    ] {
        assert_eq!(
            std::fs::read(p.join("a").join(f)).unwrap(),
            std::fs::read(p.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let run = json(p.join("a/run.json"));
    for f in run["artifacts"].as_array().unwrap() {
        assert!(p.join("a").join(f.as_str().unwrap()).exists());
    }
    assert_eq!(run["config"]["max_epochs"], 4);
}

#[test]
fn config_file_overrides_defaults() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    ok(
        p,
        &["synth", "--per-class", "20", "--length", "32", "--out", "d.csv"],
    );
    std::fs::write(p.join("c.toml"), "max_epochs = 2\nbatch_size = 16\n").unwrap();
    ok(
        p,
        &["train", "--data", "d.csv", "--out", "m", "--config", "c.toml"],
    );
    assert_eq!(
        std::fs::read_to_string(p.join("m/history.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    assert_eq!(json(p.join("m/train_config.json"))["batch_size"], 16);

    std::fs::write(p.join("c.json"), r#"{"max_epochs": 1}"#).unwrap();
    ok(
        p,
        &["train", "--data", "d.csv", "--out", "j", "--config", "c.json"],
    );
    assert_eq!(
        std::fs::read_to_string(p.join("j/history.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );

    std::fs::write(p.join("bad.toml"), "learning_rate = 0.1\n").unwrap();
    assert_eq!(
        code(
            p,
            &["train", "--data", "d.csv", "--out", "x", "--config", "bad.toml"]
        ),
        2
    );
}

#[test]
fn input_errors_exit_3() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    assert_eq!(code(p, &["train", "--data", "missing.csv", "--out", "m"]), 3);
    std::fs::write(p.join("nan.csv"), "label,s0,s1\n0,1,2\n1,NaN,3\n0,2,2\n").unwrap();
    assert_eq!(code(p, &["train", "--data", "nan.csv", "--out", "m"]), 3);
    std::fs::write(p.join("bad.csv"), "label,s0,s1\n0,1\n").unwrap();
    assert_eq!(code(p, &["train", "--data", "bad.csv", "--out", "m"]), 3);
    assert_eq!(code(p, &["prune", "--model", "nowhere", "--out", "q"]), 3);
    assert_eq!(code(p, &["eval", "--model", "nowhere"]), 3);
}

#[test]
fn divergence_exits_4() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    ok(
        p,
        &["synth", "--per-class", "20", "--length", "32", "--out", "d.csv"],
    );
    std::fs::write(p.join("hot.toml"), "lr0 = 1e308\nmax_epochs = 3\n").unwrap();
    assert_eq!(
        code(
            p,
            &["train", "--data", "d.csv", "--out", "m", "--config", "hot.toml"]
        ),
        4
    );
}

#[test]
fn prune_full_ratio_keeps_everything() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    baseline(p);
    ok(
        p,
        &[
            "prune",
            "--model",
            "base",
            "--ratio",
            "1.0",
            "--out",
            "full",
            "--max-epochs",
            "1",
        ],
    );
    let rec = json(p.join("full/prune.json"));
    for (layer, width) in rec["layers"].as_array().unwrap().iter().zip([16, 32, 64]) {
        let keep: Vec<u64> = layer["keep"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        assert_eq!(keep, (0..width).collect::<Vec<_>>());
    }
    assert_eq!(
        code(p, &["prune", "--model", "base", "--ratio", "0", "--out", "z"]),
        2
    );
}

#[test]
fn prune_eval_report_pipeline() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    baseline(p);
    ok(
        p,
        &[
            "prune",
            "--model",
            "base",
            "--verify",
            "--out",
            "half",
            "--max-epochs",
            "2",
        ],
    );
    let manifest = json(p.join("half/manifest.json"));
    assert_eq!(manifest["architecture"]["widths"], serde_json::json!([8, 16, 32]));
    assert_eq!(json(p.join("half/prune.json"))["verify_gap"], 0.0);

    ok(p, &["eval", "--model", "base"]);
    ok(p, &["eval", "--model", "half", "--out", "half_eval"]);
    let rb = json(p.join("base/report.json"));
    let rp = json(p.join("half_eval/report.json"));
    assert_eq!(rb["test_indices"], rp["test_indices"]);
    assert_eq!(rb["kernels_retained_pct"], 100.0);
    assert_eq!(rp["kernels_retained_pct"], 50.0);
    for (r, csv) in [
        (&rb, p.join("base/confusion.csv")),
        (&rp, p.join("half_eval/confusion.csv")),
    ] {
        let cells: Vec<Vec<u64>> = std::fs::read_to_string(csv)
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
            .collect();
        let total: u64 = cells.iter().flatten().sum();
        let trace: u64 = (0..cells.len()).map(|i| cells[i][i]).sum();
        assert_eq!(r["accuracy"].as_f64().unwrap(), trace as f64 / total as f64);
    }

    ok(
        p,
        &[
            "report",
            "--baseline",
            "base/report.json",
            "--pruned",
            "half_eval/report.json",
            "--out",
            "rep",
        ],
    );
    let md = std::fs::read_to_string(p.join("rep/comparison.md")).unwrap();
    let b_row = md.find("| Baseline CNN").unwrap();
    let p_row = md.find("| Pruned CNN").unwrap();
    assert!(b_row < p_row);
    assert!(md.contains("| 100% |") && md.contains("| 50% |"));

    let csv = std::fs::read_to_string(p.join("rep/comparison.csv")).unwrap();
    let mut seen = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (b, q, d): (f64, f64, f64) = (
            f[1].parse().unwrap(),
            f[2].parse().unwrap(),
            f[3].parse().unwrap(),
        );
        assert_eq!(d, q - b, "{line}");
        if f[0] == "accuracy_pct" {
            assert_eq!(b, 100.0 * rb["accuracy"].as_f64().unwrap());
            assert_eq!(q, 100.0 * rp["accuracy"].as_f64().unwrap());
            seen += 1;
        }
        if f[0] == "macro_f1" {
            assert_eq!(
                d,
                rp["macro_f1"].as_f64().unwrap() - rb["macro_f1"].as_f64().unwrap()
            );
            seen += 1;
        }
    }
    assert_eq!(seen, 2);

    let curves = std::fs::read_to_string(p.join("rep/loss_curves.csv")).unwrap();
    assert_eq!(curves.lines().filter(|l| l.starts_with("baseline,")).count(), 3);
    assert_eq!(curves.lines().filter(|l| l.starts_with("pruned,")).count(), 2);
    assert_eq!(
        std::fs::read(p.join("rep/confusion_pruned.csv")).unwrap(),
        std::fs::read(p.join("half_eval/confusion.csv")).unwrap()
    );

    // a report whose confusion matrix has another class count
    let mut other = rp.clone();
    other["confusion"]["counts"] = serde_json::json!([[1, 0], [0, 1]]);
    std::fs::write(p.join("k2.json"), other.to_string()).unwrap();
    assert_eq!(
        code(
            p,
            &[
                "report",
                "--baseline",
                "base/report.json",
                "--pruned",
                "k2.json",
                "--out",
                "rep2"
            ]
        ),
        3
    );
}

#[test]
fn eval_rejects_mismatched_scaler_and_corrupt_model() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    baseline(p);
    let scaler_path = p.join("base/scaler.json");
    let original = std::fs::read_to_string(&scaler_path).unwrap();
    let mut s: Value = serde_json::from_str(&original).unwrap();
    s["mean"].as_array_mut().unwrap().pop();
    s["std"].as_array_mut().unwrap().pop();
    std::fs::write(&scaler_path, s.to_string()).unwrap();
    assert_eq!(code(p, &["eval", "--model", "base"]), 3);
    std::fs::write(&scaler_path, original).unwrap();
    ok(p, &["eval", "--model", "base"]);

    let params = p.join("base/params.bin");
    let mut blob = std::fs::read(&params).unwrap();
    blob[100] ^= 0x01;
    std::fs::write(&params, &blob).unwrap();
    let out = run(p, &["eval", "--model", "base"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
    assert_eq!(code(p, &["prune", "--model", "base", "--out", "q"]), 3);

    std::fs::write(&params, &blob[..blob.len() / 2]).unwrap();
    assert_eq!(code(p, &["eval", "--model", "base"]), 3);
}

#[test]
fn eval_rejects_other_dataset() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    baseline(p);
    ok(
        p,
        &[
            "synth",
            "--per-class",
            "31",
            "--length",
            "32",
            "--out",
            "other.csv",
        ],
    );
    assert_eq!(code(p, &["eval", "--model", "base", "--data", "other.csv"]), 3);
    ok(
        p,
        &[
            "synth",
            "--per-class",
            "30",
            "--length",
            "40",
            "--out",
            "wide.csv",
        ],
    );
    assert_eq!(code(p, &["eval", "--model", "base", "--data", "wide.csv"]), 3);
}
