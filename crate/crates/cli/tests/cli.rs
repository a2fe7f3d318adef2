use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use uritwin::dielectric::DipoleConfig;
use uritwin::resonator::{default_calibration, synth_s11};
use uritwin::spectra::write_touchstone;
use uritwin::{Coupling, FrequencySweep, SampleDielectrics, TouchstoneFormat, UrineCondition};

fn uritwin<P: AsRef<std::ffi::OsStr>>(args: &[P]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uritwin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn ok(out: Output) -> String {
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    stdout(&out)
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Short sweep around the loaded resonances with the default 1 MHz step.
const SMALL_CONFIG: &str = r#"{
  "generation": {"sweep": {"f_start_hz": 6.0e8, "f_stop_hz": 8.0e8, "n_points": 201}},
  "train": {"epochs": 60, "batch_size": 16}
}"#;

fn small_sweep() -> FrequencySweep {
    FrequencySweep {
        f_start_hz: 6.0e8,
        f_stop_hz: 8.0e8,
        n_points: 201,
    }
}

fn write_s1p(path: &Path, condition: UrineCondition, sweep: &FrequencySweep) {
    let sample = SampleDielectrics::nominal(condition, &DipoleConfig::default());
    let syn = synth_s11(&default_calibration(), &Coupling::default(), &sample, sweep).unwrap();
    fs::write(path, write_touchstone(&syn.spectrum, TouchstoneFormat::Ri, None)).unwrap();
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&uritwin::<&str>(&[])), 1);
    assert_eq!(code(&uritwin(&["bogus"])), 1);
    assert_eq!(code(&uritwin(&["generate", "--seed", "1"])), 1);
    assert_eq!(code(&uritwin(&["tables", "--table", "3"])), 1);
    assert_eq!(code(&uritwin(&["--help"])), 0);
}

#[test]
fn calibrate_default_residuals_within_five_megahertz() {
    let dir = TempDir::new().unwrap();
    let out = ok(uritwin(&["calibrate", "--out", s(&p(&dir, "cal.json"))]));
    let residuals: Vec<f64> = out
        .lines()
        .filter(|l| l.starts_with("eps="))
        .filter_map(|l| l.split("residual_MHz=").nth(1))
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(residuals.len(), 5, "{out}");
    assert!(residuals.iter().all(|r| r.abs() <= 5.0), "{out}");
    let cal: Value = serde_json::from_str(&fs::read_to_string(p(&dir, "cal.json")).unwrap()).unwrap();
    assert!(cal["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn calibrate_two_exact_points_gives_zero_residuals() {
    let dir = TempDir::new().unwrap();
    let m = default_calibration();
    let f = |eps: f64| uritwin::resonator::loaded_resonance(&m, eps).unwrap();
    let pts = format!(
        r#"[{{"eps_mid": 60.0, "f_r_hz": {}}}, {{"eps_mid": 78.0, "f_r_hz": {}}}]"#,
        f(60.0),
        f(78.0)
    );
    fs::write(p(&dir, "pts.json"), pts).unwrap();
    let out = ok(uritwin(&[
        "calibrate",
        "--points",
        s(&p(&dir, "pts.json")),
        "--out",
        s(&p(&dir, "c.json")),
    ]));
    for l in out.lines().filter(|l| l.contains("residual_MHz=")) {
        // printed at 4 decimals
        let r: f64 = l.split("residual_MHz=").nth(1).unwrap().parse().unwrap();
        assert_eq!(r.abs(), 0.0, "{l}");
    }
}

#[test]
fn calibrate_failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "one.json"), r#"[{"eps_mid": 70.0, "f_r_hz": 7.0e8}]"#).unwrap();
    let out = uritwin(&[
        "calibrate",
        "--points",
        s(&p(&dir, "one.json")),
        "--out",
        s(&p(&dir, "c.json")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr)
        .to_lowercase()
        .contains("calibration"));

    fs::write(p(&dir, "bad.json"), "[{").unwrap();
    let out = uritwin(&[
        "calibrate",
        "--points",
        s(&p(&dir, "bad.json")),
        "--out",
        s(&p(&dir, "c.json")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_inputs_exit_two_and_unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "bad.s1p"), "# Hz S RI R 50\n1e9 abc 0\n").unwrap();
    assert_eq!(code(&uritwin(&["features", "--in", s(&p(&dir, "bad.s1p"))])), 2);
    assert_eq!(code(&uritwin(&["features", "--in", s(&p(&dir, "missing.s1p"))])), 2);

    fs::write(p(&dir, "cfg.json"), r#"{"train": {"epochs": 2, "learning_rat": 0.1}}"#).unwrap();
    let out = uritwin(&[
        "calibrate",
        "--config",
        s(&p(&dir, "cfg.json")),
        "--out",
        s(&p(&dir, "c.json")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
}

#[test]
fn features_self_baseline_is_zero() {
    let dir = TempDir::new().unwrap();
    let f = p(&dir, "h.s1p");
    write_s1p(&f, UrineCondition::Healthy, &FrequencySweep::default());
    let out: Value = serde_json::from_str(&ok(uritwin(&["features", "--in", s(&f), "--baseline", s(&f)]))).unwrap();
    assert_eq!(out["delta_f"].as_f64(), Some(0.0));
    assert_eq!(out["delta_phi_deg"].as_f64(), Some(0.0));
    let plain: Value = serde_json::from_str(&ok(uritwin(&["features", "--in", s(&f)]))).unwrap();
    assert!(plain["delta_f"].is_null());
}

#[test]
fn write_failures_exit_three() {
    let dir = TempDir::new().unwrap();
    let out = uritwin(&["calibrate", "--out", s(&dir.path().join("no/such/dir/c.json"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn tables_print_csv() {
    let t1 = ok(uritwin(&["tables", "--table", "1"]));
    assert_eq!(t1.lines().count(), 6);
    assert!(t1.contains("healthy,70,75"));
    let t2 = ok(uritwin(&["tables", "--table", "2"]));
    assert!(t2.contains("No disease (baseline)"));
}

fn parse_csv_confusion(text: &str) -> Vec<Vec<u64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

/// calibrate → generate → split → train → eval → classify, twice.
#[test]
fn pipeline_end_to_end_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "cfg.json");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let cal = p(&dir, "cal.json");
    ok(uritwin(&["calibrate", "--out", s(&cal)]));

    let run = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let f = |n: &str| p(&dir, &format!("{tag}-{n}"));
        ok(uritwin(&[
            "generate",
            "--calibration",
            s(&cal),
            "--n-per-class",
            "100",
            "--seed",
            "42",
            "--config",
            s(&cfg),
            "--out",
            s(&f("data.jsonl")),
        ]));
        let split = ok(uritwin(&[
            "split",
            "--data",
            s(&f("data.jsonl")),
            "--config",
            s(&cfg),
            "--train-out",
            s(&f("train.jsonl")),
            "--val-out",
            s(&f("val.jsonl")),
            "--test-out",
            s(&f("test.jsonl")),
        ]));
        assert_eq!(split.trim(), "train=350 val=75 test=75");
        ok(uritwin(&[
            "train",
            "--data",
            s(&f("train.jsonl")),
            "--val",
            s(&f("val.jsonl")),
            "--config",
            s(&cfg),
            "--out",
            s(&f("model.json")),
            "--history",
            s(&f("history.csv")),
        ]));
        ok(uritwin(&[
            "eval",
            "--data",
            s(&f("test.jsonl")),
            "--model",
            s(&f("model.json")),
            "--report-dir",
            s(&f("report")),
            "--history",
            s(&f("history.csv")),
            "--config",
            s(&cfg),
        ]));
        let mut files = vec![];
        for n in ["data.jsonl", "train.jsonl", "model.json", "history.csv"] {
            files.push((n.to_string(), fs::read(f(n)).unwrap()));
        }
        let mut names: Vec<_> = fs::read_dir(f("report"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for n in names {
            let n = n.to_string_lossy().to_string();
            files.push((format!("report/{n}"), fs::read(f("report").join(&n)).unwrap()));
        }
        files
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.len(), b.len());
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(da == db, "{na} differs between runs");
    }

    let report = dir.path().join("a-report");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(report.join("manifest.json")).unwrap()).unwrap();
    for f in manifest["files"].as_array().unwrap() {
        assert!(report.join(f.as_str().unwrap()).exists(), "{f}");
    }

    // accuracy equals trace / total of the emitted CSV
    let confusion = parse_csv_confusion(&fs::read_to_string(report.join("confusion_matrix.csv")).unwrap());
    assert_eq!(confusion.len(), 5);
    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..5).map(|k| confusion[k][k]).sum();
    let metrics: Value = serde_json::from_str(&fs::read_to_string(report.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["accuracy"].as_f64().unwrap(), trace as f64 / total as f64);

    // macro row is the unweighted mean of the class rows
    let text = fs::read_to_string(report.join("classification_report.txt")).unwrap();
    let row = |name: &str| -> Vec<f64> {
        let line = text.lines().find(|l| l.trim_start().starts_with(name)).unwrap();
        line[name.len() + line.find(name).unwrap()..]
            .split_whitespace()
            .take(3)
            .map(|v| v.parse().unwrap())
            .collect()
    };
    let classes: Vec<Vec<f64>> = UrineCondition::ALL.iter().map(|c| row(c.title())).collect();
    let macro_row = row("macro avg");
    for k in 0..3 {
        let mean = classes.iter().map(|r| r[k]).sum::<f64>() / 5.0;
        assert!(
            (macro_row[k] - mean).abs() <= 0.0051,
            "column {k}: {} vs {mean}\n{text}",
            macro_row[k]
        );
    }

    let svg = fs::read_to_string(report.join("curves.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 4);
    assert!(!svg.contains("href"));

    // a noiseless mid-range healthy spectrum on the same grid
    let s1p = p(&dir, "healthy.s1p");
    write_s1p(&s1p, UrineCondition::Healthy, &small_sweep());
    let out = ok(uritwin(&[
        "classify",
        "--in",
        s(&s1p),
        "--model",
        s(&p(&dir, "a-model.json")),
        "--calibration",
        s(&cal),
    ]));
    assert_eq!(out.lines().count(), 1);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["condition"], "healthy", "{out}");
    assert!(v["confidence"].as_f64().unwrap() > 0.9, "{out}");
    assert_eq!(v["clinical"]["diseases"], "No disease (baseline)");
    assert!(v["features"]["delta_phi_deg"].as_f64().unwrap().abs() < 1e-6);

    // wrong-length spectrum is a format error
    let long = p(&dir, "long.s1p");
    write_s1p(&long, UrineCondition::Healthy, &FrequencySweep::default());
    let out = uritwin(&[
        "classify",
        "--in",
        s(&long),
        "--model",
        s(&p(&dir, "a-model.json")),
        "--calibration",
        s(&cal),
    ]);
    assert_eq!(code(&out), 2);
}
