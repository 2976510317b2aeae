use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ripple_core::dataset::{Circuit, Dataset, SamplePoint, Targets, XKind};
use ripple_core::eval::{build_report, MethodPredictions};

fn ripple(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ripple")).args(args).output().expect("spawn ripple")
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("ripple-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest_files(dir: &Path, command: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(format!("manifest.{command}.json"))).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["files"].clone()
}

#[test]
fn invalid_flag_value_is_a_usage_error() {
    let o = ripple(&["simulate", "--load-w", "lots"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = ripple(&["--circuit", "buck", "dataset"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ripple(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inconsistent_config_is_a_usage_error() {
    let out = tmp("badcfg");
    let o = ripple(&["--out", out.to_str().unwrap(), "dataset", "--n-points", "10", "--n-test", "8"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn simulation_errors_exit_one() {
    let out = tmp("simerr");
    let o = ripple(&["--out", out.to_str().unwrap(), "simulate", "--load-w=-5"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn simulate_writes_waveforms_deterministically() {
    let (a, b) = (tmp("sim-a"), tmp("sim-b"));
    for d in [&a, &b] {
        let o = ripple(&["-q", "--seed", "7", "--out", d.to_str().unwrap(), "simulate", "--circuit", "bridge", "--load-w", "626"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["v_out.csv", "i_cap.csv", "i_in.csv", "i_diode.csv", "i_cap_noisy.csv", "simulation.json"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(manifest_files(&a, "simulate"), manifest_files(&b, "simulate"));
    let header = fs::read_to_string(a.join("i_cap.csv")).unwrap();
    assert!(header.starts_with("t_seconds,value\n"));
}

#[test]
fn missing_input_names_the_path() {
    let out = tmp("missing");
    let o = ripple(&["--out", out.to_str().unwrap(), "train", "--train", "/nonexistent/train.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/train.csv"), "{}", stderr(&o));
}

#[test]
fn report_marks_winners() {
    let test: Vec<(f64, Targets)> =
        (0..3).map(|i| (500.0 + 100.0 * i as f64, Targets { rms: 5.0 + i as f64, h2: 4.0, h4: 3.0 })).collect();
    let good = MethodPredictions {
        name: "llm".into(),
        predictions: test.iter().map(|&(x, t)| (x, Targets { rms: t.rms * 1.01, ..t })).collect(),
    };
    let bad = MethodPredictions {
        name: "poly_cv".into(),
        predictions: test.iter().map(|&(x, t)| (x, Targets { rms: t.rms * 1.2, h2: 4.4, h4: 3.3 })).collect(),
    };
    let points = test
        .iter()
        .map(|&(x, t)| SamplePoint { x_kind: XKind::LoadPowerW, x, y_rms: t.rms, y_h2: t.h2, y_h4: t.h4 })
        .collect();
    let test_set = Dataset { circuit: Circuit::Bridge, points, seed: 0, provenance: "fixture".into() };
    let r = build_report(&test_set, &[good, bad], Some((500.0, 600.0))).unwrap();
    let dir = tmp("report");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("eval_report.json");
    fs::write(&path, serde_json::to_string(&r).unwrap()).unwrap();
    let o = ripple(&["--circuit", "bridge", "report", "--report", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("llm") && text.contains("poly_cv"), "{text}");
    assert!(text.contains('*'), "{text}");
    assert!(text.contains("(ext)"), "{text}");
    assert!(text.contains("MAPE"), "{text}");
}

#[test]
fn stage_commands_chain_through_files() {
    let out = tmp("stages");
    let o_s = out.to_str().unwrap();
    let common = ["-q", "--seed", "3", "--out", o_s];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = common.iter().chain(extra).copied().collect();
        let o = ripple(&args);
        assert!(o.status.success(), "{:?}: {}", extra, stderr(&o));
        String::from_utf8(o.stdout).unwrap()
    };
    run(&["dataset", "--n-points", "30", "--n-test", "8"]);
    assert_eq!(fs::read_to_string(out.join("test.csv")).unwrap().lines().count(), 9);
    let small = ["--k", "3", "--n-instances", "20", "--digits", "3"];
    let mut train_args = vec![
        "train", "--layers", "2", "--heads", "2", "--embed-dim", "32", "--epochs", "40", "--batch-size", "5", "--base-lr", "3e-3",
    ];
    train_args.extend(small);
    run(&train_args);
    assert!(out.join("model.ckpt").exists());
    assert_eq!(fs::read_to_string(out.join("loss.csv")).unwrap().lines().count(), 161);
    let mut eval_args = vec!["evaluate", "--n-runs", "2", "--temperature", "0"];
    eval_args.extend(small);
    let table = run(&eval_args);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 8);
    assert!(table.contains("gbt"), "{table}");
    let mut pred_args = vec!["predict", "--x", "700", "--n-runs", "2", "--temperature", "0"];
    pred_args.extend(small);
    let pred = run(&pred_args);
    let v: serde_json::Value = serde_json::from_str(&pred).unwrap();
    assert_eq!(v["x"], 700.0);
    for svg in ["eval_scatter_rms.svg", "loss.svg"] {
        assert!(fs::read_to_string(out.join(svg)).unwrap().starts_with("<svg"), "{svg}");
    }
    for cmd in ["dataset", "train", "evaluate", "predict"] {
        assert!(out.join(format!("manifest.{cmd}.json")).exists(), "{cmd}");
    }
}
