use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lambmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lambmp"))
        .args(args)
        .env_remove("LAMBMP_OUT")
        .output()
        .expect("spawn lambmp")
}

fn ok(args: &[&str]) -> String {
    let o = lambmp(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| rec.unwrap()[i].parse().unwrap())
        .collect()
}

#[test]
fn synth_defaults_write_nine_signals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["synth", "--out", out]);
    let signals = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("signal_d")
        })
        .count();
    assert_eq!(signals, 9);
    assert!(dir.path().join("dispersion.csv").exists());
    assert_eq!(
        column(&dir.path().join("signal_d450mm.csv"), "time_s").len(),
        1024
    );
}

#[test]
fn single_mode_differs_from_both() {
    let dir = tempfile::tempdir().unwrap();
    let both = dir.path().join("both");
    let s0 = dir.path().join("s0");
    ok(&[
        "synth",
        "--out",
        both.to_str().unwrap(),
        "--d-min",
        "0.3",
        "--d-max",
        "0.3",
    ]);
    ok(&[
        "synth",
        "--out",
        s0.to_str().unwrap(),
        "--d-min",
        "0.3",
        "--d-max",
        "0.3",
        "--modes",
        "s0",
    ]);
    let a = column(&both.join("signal_d300mm.csv"), "value");
    let b = column(&s0.join("signal_d300mm.csv"), "value");
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-3));
}

#[test]
fn decompose_error_matches_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    ok(&["synth", "--out", synth.to_str().unwrap()]);
    let signal = synth.join("signal_d450mm.csv");
    for method in ["sampm", "sacmpm"] {
        let out = dir.path().join(method);
        ok(&[
            "decompose",
            "--signal",
            signal.to_str().unwrap(),
            "--method",
            method,
            "--out",
            out.to_str().unwrap(),
        ]);
        let history = column(&out.join("convergence.csv"), "error_pct");
        let s = column(&out.join("reconstruction.csv"), "signal");
        let r = column(&out.join("reconstruction.csv"), "reconstruction");
        let num: f64 = s
            .iter()
            .zip(&r)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = s.iter().map(|a| a * a).sum::<f64>().sqrt();
        let last = *history.last().unwrap();
        assert!(last <= 10.0);
        assert!((100.0 * num / den - last).abs() < 1e-9, "{method}: {last}");
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("decomposition.json")).unwrap())
                .unwrap();
        assert_eq!(json["method"], method);
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let from_file = dir.path().join("from_file");
    fs::write(
        &cfg,
        format!(
            r#"{{"out": "{}", "d_min_m": 0.2, "d_max_m": 0.3, "len": 2048}}"#,
            from_file.display()
        ),
    )
    .unwrap();
    ok(&["--config", cfg.to_str().unwrap(), "synth", "--len", "1500"]);
    let names: Vec<String> = fs::read_dir(&from_file)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("signal_d"))
        .collect();
    assert_eq!(names.len(), 3);
    assert_eq!(
        column(&from_file.join("signal_d200mm.csv"), "value").len(),
        1500
    );
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"d_minimum": 0.2}"#).unwrap();
    assert!(!lambmp(&["--config", cfg.to_str().unwrap(), "synth"])
        .status
        .success());
}

#[test]
fn failure_exits_nonzero_and_marks_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lambmp(&["decompose", "--signal", "/nonexistent.csv", "--out", out]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());
    let o = lambmp(&["synth", "--out", out, "--len", "10"]);
    assert!(!o.status.success());
    assert!(dir.path().join("FAILED").exists());
    ok(&["synth", "--out", out, "--d-min", "0.2", "--d-max", "0.2"]);
    assert!(!dir.path().join("FAILED").exists());
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lambmp"))
        .args(["atom"])
        .env("LAMBMP_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("atom.csv").exists());
}

#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "pipeline",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--epochs",
            "40",
            "--n",
            "8",
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in [
        "report.csv",
        "predictions.csv",
        "report.json",
        "features_sacmpm.csv",
        "model_sampm.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let rows = column(&a.join("report.csv"), "test_error_pct");
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|v| v.is_finite()));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["db", "gen", "--out", out, "--seed", "3"]);
    ok(&["features", "--out", out, "--m", "3"]);
    let feats = dir.path().join("features_sampm.csv");
    let targets = dir.path().join("db").join("targets.csv");
    ok(&[
        "localize",
        "train",
        "--out",
        out,
        "--features",
        feats.to_str().unwrap(),
        "--targets",
        targets.to_str().unwrap(),
        "--epochs",
        "30",
    ]);
    let stdout = ok(&[
        "localize",
        "eval",
        "--out",
        out,
        "--model",
        dir.path().join("model.json").to_str().unwrap(),
        "--features",
        feats.to_str().unwrap(),
        "--targets",
        targets.to_str().unwrap(),
    ]);
    assert!(stdout.starts_with("5 cases"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 5);
}
