use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qforecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qforecast"))
        .args(args)
        .env_remove("QFORECAST_OUT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, days: &str, seed: &str) -> std::path::PathBuf {
    let csv = dir.join(format!("s{days}_{seed}.csv"));
    let out = qforecast(&["synth-data", "--days", days, "--seed", seed, "--signal", "0.9", "--out", path(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    csv
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        (
            "train",
            &["--model", "--data", "--config", "--out", "--seed", "--epochs", "--lr", "--batch", "--delta-theta", "--fd-scheme", "--optimizer", "--threads"],
        ),
        ("eval", &["--model", "--data", "--out"]),
        (
            "bench",
            &["--data", "--days", "--signal", "--paper-reference", "--config", "--out", "--seed", "--epochs", "--threads"],
        ),
        ("encode", &["--scheme", "--features", "--data", "--row"]),
        ("synth-data", &["--days", "--seed", "--signal", "--trend", "--noise", "--out"]),
    ];
    for (cmd, flags) in expected {
        let out = qforecast(&[cmd, "--help"]);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in *flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn synth_data_contract() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "500", "1");
    let b = dir.path().join("again.csv");
    assert_eq!(code(&qforecast(&["synth-data", "--days", "500", "--seed", "1", "--signal", "0.9", "--out", path(&b)])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let rows = qforecast::market::load_csv(&a).unwrap();
    assert_eq!(rows.len(), 500);

    assert_eq!(code(&qforecast(&["synth-data", "--days", "1"])), 2);
    let blocked = dir.path().join("missing").join("s.csv");
    assert_eq!(code(&qforecast(&["synth-data", "--out", path(&blocked)])), 3);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "80", "7");
    let before = fs::read(&csv).unwrap();
    let out_dir = dir.path().join("r");
    for model in ["ann", "qqbn", "qqtn"] {
        let args = ["train", "--model", model, "--data", path(&csv), "--epochs", "3", "--seed", "7", "--out", path(&out_dir)];
        let out = qforecast(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join(format!("checkpoint_{model}.json")).is_file());
        let history = fs::read_to_string(out_dir.join(format!("history_{model}.csv"))).unwrap();
        assert_eq!(history.lines().count(), 4, "header plus one line per epoch");

        let checkpoint = fs::read(out_dir.join(format!("checkpoint_{model}.json"))).unwrap();
        assert_eq!(code(&qforecast(&args)), 0);
        assert_eq!(checkpoint, fs::read(out_dir.join(format!("checkpoint_{model}.json"))).unwrap());

        let out = qforecast(&["eval", "--model", model, "--data", path(&csv), "--out", path(&out_dir)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let eval: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join(format!("eval_{model}.json"))).unwrap()).unwrap();
        assert!(eval["accuracy"].as_f64().is_some_and(|a| (0.0..=1.0).contains(&a)));
    }
    assert_eq!(fs::read(&csv).unwrap(), before, "input must not change");
}

#[test]
fn train_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(code(&qforecast(&["train", "--model", "svm", "--data", "x.csv", "--out", out])), 2);
    let missing = dir.path().join("none.csv");
    assert_eq!(code(&qforecast(&["train", "--model", "ann", "--data", path(&missing), "--out", out])), 3);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "date,open,high,low,close,volume\n2024-01-02,10,8,9,10,1\n").unwrap();
    assert_eq!(code(&qforecast(&["train", "--model", "ann", "--data", path(&bad), "--out", out])), 3);

    let csv = synth(dir.path(), "40", "2");
    assert_eq!(code(&qforecast(&["train", "--model", "ann", "--data", path(&csv), "--lr", "-1", "--out", out])), 2);
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"learning_rate": 0.01, "momentum": 0.9}"#).unwrap();
    assert_eq!(code(&qforecast(&["train", "--model", "ann", "--data", path(&csv), "--config", path(&config), "--out", out])), 2);
    assert_eq!(code(&qforecast(&["eval", "--model", "qqbn", "--data", path(&csv), "--out", out])), 3);
}

#[test]
fn bench_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(threads);
        let out = qforecast(&[
            "bench", "--days", "120", "--signal", "0.9", "--epochs", "3", "--seed", "5", "--threads", threads,
            "--paper-reference", "--out", path(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("96.8% Faster than ANN") && stdout.contains("73.5"));
        let report = fs::read_to_string(out_dir.join("report.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&report).unwrap();
        assert_eq!(v["models"].as_array().unwrap().len(), 3);
        reports.push((report, fs::read(out_dir.join("predictions.csv")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn bench_on_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "90", "4");
    let out_dir = dir.path().join("r");
    let out = qforecast(&["bench", "--data", path(&csv), "--epochs", "2", "--out", path(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "cost_curves.csv", "predictions.csv", "residuals_ann.csv", "residuals_qqbn.csv", "residuals_qqtn.csv"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn encode_examples() {
    let out = qforecast(&["encode", "--scheme", "amplitude", "--features", "0.6,0.4,0,0,0"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.832050") && text.contains("0.554700"), "{text}");

    let out = qforecast(&["encode", "--scheme", "phase-qubit", "--features", "0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().find(|l| l.starts_with("|0>")).unwrap();
    assert!(first.contains("probability 1.000000"), "{text}");

    let out = qforecast(&["encode", "--scheme", "phase-qutrit", "--features", "0.5,0.25"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().filter(|l| l.starts_with('|')).count(), 9);

    assert_eq!(code(&qforecast(&["encode", "--scheme", "amplitude", "--features", "1.5"])), 2);
    assert_eq!(code(&qforecast(&["encode", "--scheme", "amplitude"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), "30", "9");
    let out = qforecast(&["encode", "--scheme", "phase-qutrit", "--data", path(&csv), "--row", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}
