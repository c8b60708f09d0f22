use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pnr_core::dsp_pipeline::{read_charge_binary, read_charge_csv};
use pnr_core::quantum_stats::{Calibration, CalibrationMethod};
use pnr_harness::analysis::{analyze_spectrum, SpectrumOptions};
use pnr_harness::config::{AnalysisSpec, RunConfig};
use pnr_harness::sim::simulate;
use serde_json::Value;
use tempfile::TempDir;

fn pnrtwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnrtwin")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("run.json");
    fs::write(&p, json).unwrap();
    p
}

/// Noiseless twin beam on two datasheet sensors, full waveforms.
const NOISELESS: &str = r#"{
  "seed": 3,
  "source": {"kind": "twin_beam", "mean": 4.0, "modes": 20},
  "detectors": ["25CS", "25CS"],
  "events": 20000,
  "mode": "full-waveform",
  "waveform": {"noise_sigma": 0.0},
  "analysis": {"products": ["stats"], "min_peak_counts": 1}
}"#;

const SMALL: &str = r#"{
  "seed": 9,
  "source": {"kind": "coherent", "mean": 20.0},
  "detectors": ["50CS"],
  "events": 3000,
  "mode": "full-waveform"
}"#;

#[test]
fn validate_config_accepts_and_rejects() {
    let t = TempDir::new().unwrap();
    let ok = write_config(t.path(), SMALL);
    let o = pnrtwin(&["validate-config", "--config", s(&ok)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok:"));

    let zero = write_config(t.path(), &SMALL.replace("3000", "0"));
    assert_eq!(code(&pnrtwin(&["validate-config", "--config", s(&zero)])), 2);

    let unknown = write_config(t.path(), &SMALL.replace("\"seed\"", "\"sead\""));
    assert_eq!(code(&pnrtwin(&["validate-config", "--config", s(&unknown)])), 2);

    let missing = t.path().join("absent.json");
    assert_eq!(code(&pnrtwin(&["validate-config", "--config", s(&missing)])), 3);
}

#[test]
fn events_zero_override_is_config_error() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), SMALL);
    let o = pnrtwin(&["simulate", "--config", s(&cfg), "--events", "0", "--out", s(&t.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(!t.path().join("o").exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&pnrtwin(&["simulate"])), 2);
    assert_eq!(code(&pnrtwin(&["frobnicate"])), 2);
    assert_eq!(code(&pnrtwin(&["preset", "--preset", "fig9_nothing", "--out", "/tmp"])), 2);
}

#[test]
fn same_seed_gives_identical_files() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), SMALL);
    let mut outs = Vec::new();
    for (k, w) in ["1", "2"].iter().enumerate() {
        let dir = t.path().join(format!("run{k}"));
        let o = pnrtwin(&["simulate", "--config", s(&cfg), "--workers", w, "--out", s(&dir)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(dir);
    }
    for f in ["counts.csv", "channel1.pnrw"] {
        assert_eq!(fs::read(outs[0].join(f)).unwrap(), fs::read(outs[1].join(f)).unwrap(), "{f}");
    }
    let other = t.path().join("other");
    assert_eq!(code(&pnrtwin(&["simulate", "--config", s(&cfg), "--seed", "10", "--out", s(&other)])), 0);
    assert_ne!(fs::read(outs[0].join("counts.csv")).unwrap(), fs::read(other.join("counts.csv")).unwrap());
}

#[test]
fn counts_only_mode_writes_no_waveforms() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), SMALL);
    let dir = t.path().join("c");
    assert_eq!(code(&pnrtwin(&["simulate", "--config", s(&cfg), "--mode", "counts-only", "--out", s(&dir)])), 0);
    assert!(dir.join("counts.csv").exists());
    assert!(!dir.join("channel1.pnrw").exists());
}

fn stat(report: &Value, key: &str) -> f64 {
    report["stats"][key]["value"].as_f64().unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn waveform_and_counts_paths_agree_when_noiseless() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), NOISELESS);
    let sim = t.path().join("sim");
    assert_eq!(code(&pnrtwin(&["simulate", "--config", s(&cfg), "--out", s(&sim)])), 0);
    let q = t.path().join("q.csv");
    let o = pnrtwin(&[
        "process",
        "--config",
        s(&cfg),
        "--input",
        s(&sim.join("channel1.pnrw")),
        s(&sim.join("channel2.pnrw")),
        "--out",
        s(&q),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let mut reports = Vec::new();
    for (input, name) in [(q.clone(), "aq"), (sim.join("counts.csv"), "ac")] {
        let dir = t.path().join(name);
        let o = pnrtwin(&["analyze", "--config", s(&cfg), "--input", s(&input), "--out", s(&dir)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(serde_json::from_str::<Value>(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap());
    }
    assert_eq!(reports[0]["stats"]["excluded_fraction"].as_f64(), Some(0.0));
    for key in ["mean1", "mean2", "fano1", "fano2", "gamma", "r"] {
        let (a, b) = (stat(&reports[0], key), stat(&reports[1], key));
        assert!((a - b).abs() <= 1e-6, "{key}: {a} vs {b}");
    }
}

#[test]
fn calibrated_charges_reproduce_fired_cells() {
    let mut cfg: RunConfig = serde_json::from_str(NOISELESS).unwrap();
    cfg.events = 5000;
    cfg.detectors.truncate(1);
    cfg.source = pnr_core::photon_sources::LightStateSpec::coherent(24.0);
    let out = simulate(&cfg, false).unwrap();
    assert_eq!(out.charges.len(), out.counts.len());
    let q: Vec<f64> = out.charges.iter().map(|c| c.q1).collect();
    let spec = AnalysisSpec { min_peak_counts: 1, ..Default::default() };
    let a = analyze_spectrum(&q, &SpectrumOptions::from(&spec)).unwrap();
    let cal = Calibration::new(a.peaks(), CalibrationMethod::NearestPeak).unwrap();
    for (c, n) in out.charges.iter().zip(&out.counts) {
        assert_eq!(cal.apply(c.q1), Some(n.m1 as f64), "event {}", n.event);
    }
}

#[test]
fn process_writes_binary_matching_csv() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), SMALL);
    let sim = t.path().join("sim");
    assert_eq!(code(&pnrtwin(&["simulate", "--config", s(&cfg), "--out", s(&sim)])), 0);
    let wf = sim.join("channel1.pnrw");
    let (csv, bin) = (t.path().join("q.csv"), t.path().join("q.bin"));
    assert_eq!(code(&pnrtwin(&["process", "--input", s(&wf), "--out", s(&csv)])), 0);
    assert_eq!(code(&pnrtwin(&["process", "--input", s(&wf), "--out", s(&bin)])), 0);
    let a = read_charge_csv(fs::File::open(&csv).unwrap()).unwrap();
    let b = read_charge_binary(fs::File::open(&bin).unwrap(), 1).unwrap();
    assert_eq!(a.len(), 3000);
    assert_eq!(a, b);
}

#[test]
fn analyze_writes_spectrum_products() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), SMALL);
    let sim = t.path().join("sim");
    assert_eq!(code(&pnrtwin(&["simulate", "--config", s(&cfg), "--out", s(&sim)])), 0);
    let q = t.path().join("q.csv");
    assert_eq!(code(&pnrtwin(&["process", "--input", s(&sim.join("channel1.pnrw")), "--out", s(&q)])), 0);
    let dir = t.path().join("a");
    let o = pnrtwin(&["analyze", "--input", s(&q), "--out", s(&dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "histogram_arm1.csv", "peaks_arm1.csv", "metrics_arm1.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let peaks = fs::read_to_string(dir.join("peaks_arm1.csv")).unwrap();
    assert!(peaks.lines().count() > 5);
}

#[test]
fn analyze_input_errors_are_io() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("a");
    let missing = t.path().join("none.csv");
    assert_eq!(code(&pnrtwin(&["analyze", "--input", s(&missing), "--out", s(&out)])), 3);
    let junk = t.path().join("junk.csv");
    fs::write(&junk, "what,is,this\n1,2,3\n").unwrap();
    assert_eq!(code(&pnrtwin(&["analyze", "--input", s(&junk), "--out", s(&out)])), 3);
    let bad_pnrw = t.path().join("x.pnrw");
    fs::write(&bad_pnrw, b"nope").unwrap();
    assert_eq!(code(&pnrtwin(&["process", "--input", s(&bad_pnrw), "--out", s(&out)])), 3);
}

#[test]
fn unresolvable_spectrum_is_numerical_failure() {
    let t = TempDir::new().unwrap();
    let q = t.path().join("flat.csv");
    let mut text = String::from("event,q1\n");
    for i in 0..2000 {
        text.push_str(&format!("{i},{}\n", (i * 7919 % 2000) as f64 * 0.37));
    }
    fs::write(&q, text).unwrap();
    let o = pnrtwin(&["analyze", "--input", s(&q), "--out", s(&t.path().join("a"))]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn preset_runs_into_named_directory() {
    let t = TempDir::new().unwrap();
    let o = pnrtwin(&["preset", "--preset", "fig6_fidelity", "--events", "4000", "--out", s(t.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = t.path().join("fig6_fidelity");
    for f in ["infidelity.csv", "variance.csv", "legend.txt"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}
