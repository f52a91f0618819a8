use std::path::Path;
use std::process::{Command, Output};

fn scconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scconf"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = scconf(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_succeeds() {
    assert_eq!(scconf(&["--help"]).status.code(), Some(0));
    assert_eq!(scconf(&["experiment", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(scconf(&["generate", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        scconf(&[
            "train",
            "--data",
            "x.csv",
            "--out",
            "m.json",
            "--estimator",
            "nope"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn generate_writes_confidence_csv() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "generate",
        "--n",
        "5",
        "--n-test",
        "7",
        "--seed",
        "1",
        "--out",
        p(dir.path()),
    ]);
    let text = std::fs::read_to_string(dir.path().join("confidence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,x1,r0,r1,r2");
    assert_eq!(lines.len(), 6);
    for row in &lines[1..] {
        let r: Vec<f64> = row.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let test = std::fs::read_to_string(dir.path().join("test.csv")).unwrap();
    assert_eq!(test.lines().count(), 8);

    // same seed, same bytes
    let again = tempfile::tempdir().unwrap();
    ok(&[
        "generate",
        "--n",
        "5",
        "--n-test",
        "7",
        "--seed",
        "1",
        "--out",
        p(again.path()),
    ]);
    assert_eq!(
        text,
        std::fs::read_to_string(again.path().join("confidence.csv")).unwrap()
    );
}

#[test]
fn onehot_noise_gives_indicator_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "generate",
        "--n",
        "20",
        "--noise",
        "onehot",
        "--n-test",
        "1",
        "--out",
        p(dir.path()),
    ]);
    let text = std::fs::read_to_string(dir.path().join("confidence.csv")).unwrap();
    for row in text.lines().skip(1) {
        let r: Vec<f64> = row.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(r.iter().filter(|v| **v == 1.0).count(), 1);
        assert_eq!(r.iter().filter(|v| **v == 0.0).count(), 2);
    }
}

#[test]
fn fit_train_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "generate",
        "--n",
        "300",
        "--n-test",
        "500",
        "--seed",
        "2",
        "--out",
        p(d),
    ]);
    let ratio = d.join("ratio.json");
    let fit = ok(&[
        "fit-ratio",
        "--conditional",
        p(&d.join("confidence.csv")),
        "--unlabeled",
        p(&d.join("unlabeled.csv")),
        "--max-centers",
        "40",
        "--out",
        p(&ratio),
    ]);
    let fit: serde_json::Value = serde_json::from_str(&fit).unwrap();
    assert!(fit["sigma"].as_f64().unwrap() > 0.0);

    let model = d.join("model.json");
    let report = ok(&[
        "train",
        "--data",
        p(&d.join("confidence.csv")),
        "--estimator",
        "norsc_conf",
        "--ratio",
        p(&ratio),
        "--epochs",
        "5",
        "--hidden",
        "16",
        "--out",
        p(&model),
    ]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["train_risk"].as_array().unwrap().len(), 5);

    let eval = ok(&[
        "evaluate",
        "--model",
        p(&model),
        "--data",
        p(&d.join("test.csv")),
    ]);
    let eval: serde_json::Value = serde_json::from_str(&eval).unwrap();
    let acc = eval["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn experiment_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "experiment",
        "--estimator",
        "sc_conf,supervised",
        "--n",
        "60",
        "--seeds",
        "0..2",
        "--set",
        "train.epochs=2",
        "--set",
        "n_test=200",
        "--set",
        "bayes_mc=2000",
        "--out",
        p(&out),
    ]);
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["train"]["epochs"], 2);
    assert_eq!(cfg["n_test"], 200);
    assert_eq!(std::fs::read_dir(out.join("trials")).unwrap().count(), 4);

    let table = ok(&["report", p(&out)]);
    assert!(table.contains("sc_conf") && table.contains("supervised"));

    // a corrupted trial is skipped with a partial-success exit code
    let victim = std::fs::read_dir(out.join("trials"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    std::fs::write(victim, "{not json").unwrap();
    let res = scconf(&["report", p(&out)]);
    assert_eq!(res.status.code(), Some(4));
    assert!(!res.stderr.is_empty());
}

#[test]
fn missing_input_is_io_error() {
    let res = scconf(&["report", "/nonexistent/run/dir"]);
    assert_eq!(res.status.code(), Some(2));
    let res = scconf(&[
        "evaluate",
        "--model",
        "/nonexistent/m.json",
        "--data",
        "/nonexistent/t.csv",
    ]);
    assert_eq!(res.status.code(), Some(2));
}
