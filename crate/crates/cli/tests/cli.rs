use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_chromahom");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CHROMAHOM_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(
        o.status.success(),
        "{cmd} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value, path: &str) -> f64 {
    v.pointer(path)
        .and_then(Value::as_f64)
        .unwrap_or_else(|| panic!("no number at {path}"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn dip_reference_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{}");
    ok("dip", &cfg, tmp.path(), &[]);
    let s = json(&tmp.path().join("dip_summary.json"));
    let w = f(&s, "/cross/fwhm_ps");
    let v = f(&s, "/cross/visibility");
    assert!((6.2..=9.3).contains(&w), "{w}");
    assert!((0.90..=0.995).contains(&v), "{v}");
    assert!(f(&s, "/telecom_telecom/fwhm_ps") > f(&s, "/red_red/fwhm_ps"));
    for key in [
        "baseline",
        "depth",
        "center_s",
        "fwhm_s",
        "visibility",
        "converged",
        "iterations",
        "residual",
    ] {
        assert!(s["cross"]["fit"].get(key).is_some(), "fit lacks {key}");
    }

    let csv = fs::read_to_string(tmp.path().join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    let hash = s["config_sha256"].as_str().unwrap();
    assert_eq!(lines.next().unwrap(), format!("# config_sha256={hash}"));
    assert_eq!(lines.next().unwrap(), "delay_ps,p_cross,p_telecom_telecom,p_red_red");
    assert_eq!(lines.count(), 641);
}

#[test]
fn dip_closed_form_cases() {
    let tmp = TempDir::new().unwrap();
    for (eta, want) in [(0.5, 1.0), (0.25, 0.6)] {
        let cfg = write_config(
            tmp.path(),
            "flat.json",
            &format!(
                r#"{{"model": {{"converter": {{"eta0": {eta}, "profile": "flat"}},
                               "telecom_filter": {{"kind": "flat"}}}}}}"#
            ),
        );
        let out = tmp.path().join(format!("eta{eta}"));
        ok("dip", &cfg, &out, &[]);
        let v = f(&json(&out.join("dip_summary.json")), "/cross/visibility");
        assert!((v - want).abs() < 1e-6, "eta {eta}: {v}");
    }
}

#[test]
fn antidip_only_same_color() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{}");
    ok("antidip", &cfg, tmp.path(), &[]);
    let s = json(&tmp.path().join("antidip_summary.json"));
    assert!(s.get("cross").is_none());
    assert!(f(&s, "/red_red/visibility") > 0.9);
    let csv = fs::read_to_string(tmp.path().join("antidip.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "delay_ps,p_telecom_telecom,p_red_red");
}

fn curve(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| {
            let (p, e) = l.split_once(',').unwrap();
            (p.parse().unwrap(), e.parse().unwrap())
        })
        .collect()
}

#[test]
fn calibrate_curve() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{}");
    let base = tmp.path().join("base");
    ok("calibrate", &cfg, &base, &[]);
    let c = curve(&base.join("calibration.csv"));
    for (p, eta) in [(35.0, 0.476), (37.2, 0.5)] {
        let &(_, got) = c.iter().find(|(q, _)| (q - p).abs() < 1e-9).expect("sampled power");
        assert!((got - eta).abs() < 1e-3, "eta({p}) = {got}");
    }
    let s = json(&base.join("calibration_summary.json"));
    assert!(f(&s, "/round_trip_error") < 1e-12);
    assert!((f(&s, "/balanced_power_w") - 37.25).abs() < 1e-9);

    // doubling P_max stretches the power axis only
    let cfg2 = write_config(tmp.path(), "c2.json", r#"{"calibration": {"p_max": "298W"}}"#);
    let scaled = tmp.path().join("scaled");
    ok("calibrate", &cfg2, &scaled, &[]);
    let c2 = curve(&scaled.join("calibration.csv"));
    assert_eq!(c.len(), c2.len());
    for ((p, e), (p2, e2)) in c.iter().zip(&c2) {
        assert!((2.0 * p - p2).abs() < 1e-9 && (e - e2).abs() < 1e-12);
    }

    let ratio = fs::read_to_string(base.join("peak_ratio.csv")).unwrap();
    assert!(ratio.lines().any(|l| l == "0.5,1"));
}

fn small_mc(extra: &str) -> String {
    format!(
        r#"{{"monte_carlo": {{"pairs_per_point": 100000, "scan_start": "-20ps", "scan_stop": "20ps",
                             "scan_step": "4ps"{extra}}}}}"#
    )
}

#[test]
fn split_pipeline_matches_combined_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "mc.json", &small_mc(""));
    let combined = tmp.path().join("combined");
    let split = tmp.path().join("split");
    ok("report", &cfg, &combined, &[]);
    ok("timetags", &cfg, &split, &[]);
    ok("correlate", &cfg, &split, &["--threads", "2"]);

    let a = fs::read(combined.join("mc_summary.json")).unwrap();
    let b = fs::read(split.join("mc_summary.json")).unwrap();
    assert_eq!(a, b);
    for name in [
        "dip_counts.csv",
        "histograms/calibration.csv",
        "histograms/point_005.csv",
    ] {
        assert_eq!(
            fs::read(combined.join(name)).unwrap(),
            fs::read(split.join(name)).unwrap(),
            "{name}"
        );
    }
    let manifest = json(&split.join("tags/manifest.json"));
    assert_eq!(manifest["points"].as_array().unwrap().len(), 11);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "mc.json", &small_mc(""));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok("timetags", &cfg, &a, &[]);
    ok("timetags", &cfg, &b, &["--threads", "1"]);
    for entry in fs::read_dir(a.join("tags")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.join("tags").join(&name)).unwrap(),
            fs::read(b.join("tags").join(&name)).unwrap(),
            "{name:?}"
        );
    }
    // no temporary files left behind
    assert!(fs::read_dir(a.join("tags"))
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().starts_with('.')));

    // a different seed changes the tags and the hash
    let c = tmp.path().join("c");
    ok("timetags", &cfg, &c, &["--seed", "2"]);
    assert_ne!(
        fs::read(a.join("tags/point_000.chtg")).unwrap(),
        fs::read(c.join("tags/point_000.chtg")).unwrap()
    );
    assert_ne!(
        json(&a.join("tags/manifest.json"))["config_sha256"],
        json(&c.join("tags/manifest.json"))["config_sha256"]
    );
}

#[test]
fn report_reference_config() {
    let tmp = TempDir::new().unwrap();
    ok("report", &repo_config("reference.json"), tmp.path(), &[]);
    let r = json(&tmp.path().join("report.json"));
    let rows = r["rows"].as_array().unwrap();
    let row = |q: &str| {
        rows.iter()
            .find(|x| x["quantity"] == q)
            .unwrap_or_else(|| panic!("no row {q}"))
    };
    for q in [
        "visibility_bound",
        "eta_at_35W",
        "dip_visibility",
        "dip_fwhm",
        "telecom_antidip_fwhm",
        "red_antidip_fwhm",
        "beat_note_282THz",
        "mc_eta",
        "mc_raw_visibility_vs_analytic",
        "mc_corrected_visibility",
    ] {
        assert_eq!(row(q)["pass"], true, "{q}: {}", row(q));
    }
    // reported for comparison only
    assert!(row("red_antidip_visibility")["pass"].is_null());
    assert_eq!(r["all_pass"], true);

    // the eta estimate at 10^6 pairs per point lands within 2 sigma
    let s = json(&tmp.path().join("mc_summary.json"));
    assert_eq!(f(&s, "/pairs_per_point"), 1e6);
    assert!((f(&s, "/eta/eta") - 0.476).abs() <= 2.0 * f(&s, "/eta/sigma"));
}

#[test]
fn accidental_gap_config_reports_both_visibilities() {
    let tmp = TempDir::new().unwrap();
    ok("report", &repo_config("accidentals.json"), tmp.path(), &[]);
    let s = json(&tmp.path().join("mc_summary.json"));
    let raw = f(&s, "/dip/raw/visibility");
    let corrected = f(&s, "/dip/corrected/visibility");
    assert!(f(&s, "/dark_rate/0") > 1e4);
    // the injected floor costs about 1.4 points of visibility
    let gap = corrected - raw;
    assert!((0.007..0.021).contains(&gap), "raw {raw}, corrected {corrected}");
    assert!((raw - 0.914).abs() < 0.02 && (corrected - 0.928).abs() < 0.02);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let code = |args: &[&str]| run(args).status.code().unwrap();

    let bad = write_config(tmp.path(), "bad.json", r#"{"modle": {}}"#);
    assert_eq!(code(&["dip", "--config", bad.to_str().unwrap(), "--out", out]), 2);
    let invalid = write_config(tmp.path(), "inv.json", r#"{"model": {"converter": {"eta0": 2}}}"#);
    assert_eq!(code(&["dip", "--config", invalid.to_str().unwrap(), "--out", out]), 2);
    assert_eq!(code(&["dip", "--config", "/nonexistent.json", "--out", out]), 2);

    let good = write_config(tmp.path(), "good.json", &small_mc(""));
    let g = good.to_str().unwrap();
    // neither --out nor output_dir
    assert_eq!(code(&["dip", "--config", g]), 2);
    assert_eq!(code(&["dip", "--config", g, "--out", out, "--threads", "0"]), 2);
    let o = Command::new(BIN)
        .args(["dip", "--config", g, "--out", out])
        .env("CHROMAHOM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    // unknown flag: argument parser error
    assert_eq!(code(&["dip", "--config", g, "--frobnicate"]), 2);

    // no tags to correlate
    assert_eq!(code(&["correlate", "--config", g, "--out", out]), 3);
    // corrupt tag file
    ok("timetags", &good, tmp.path(), &[]);
    fs::write(tmp.path().join("tags/point_003.chtg"), b"CHTG\x01\0garbage").unwrap();
    assert_eq!(code(&["correlate", "--config", g, "--out", out]), 3);
    // tags from another seed
    assert_eq!(code(&["correlate", "--config", g, "--out", out, "--seed", "9"]), 2);
    // scan too short to resolve the dip
    let narrow = write_config(
        tmp.path(),
        "narrow.json",
        r#"{"scan": {"start": "-3ps", "stop": "3ps", "step": "0.5ps"}}"#,
    );
    assert_eq!(code(&["dip", "--config", narrow.to_str().unwrap(), "--out", out]), 3);
}

#[test]
fn output_dir_from_config() {
    let tmp = TempDir::new().unwrap();
    let target = tmp.path().join("from_config");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(r#"{{"output_dir": {:?}}}"#, target.to_str().unwrap()),
    );
    let o = run(&["calibrate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(target.join("calibration.csv").exists());
}
