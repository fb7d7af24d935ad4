use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(format!("{name}.json"))
}

fn lclt(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lclt")).arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn classify_counterexample_reports_case_d_and_mixing() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["classify", spec("counterexample").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "Case D, a=1, b=√2, d=1, covolume 1, flow mixing: yes");
}

#[test]
fn classify_constant_roof_is_degenerate_and_not_weakly_mixing() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["classify", spec("constant_roof").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("Degenerate") && s.trim_end().ends_with("/ not weakly mixing"), "{s}");
}

#[test]
fn classify_generator_set_and_full_support() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["classify", spec("sqrt2_generators").to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "Case D, a=1, b=√2, d=1, covolume 1");
    let o = lclt(dir.path(), &["classify", "--full-support", spec("sqrt2_generators").to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "Case A");
}

#[test]
fn malformed_spec_exits_with_parse_code() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"type\": \"renewal\", \"atoms\": [[1, 2]]").unwrap();
    let o = lclt(&dir.path().join("out"), &["classify", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    fs::write(&bad, "{\"type\": \"teapot\"}").unwrap();
    assert_eq!(code(&lclt(&dir.path().join("out"), &["classify", bad.to_str().unwrap()])), 2);
}

#[test]
fn classification_without_exact_values_exits_with_math_code() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["classify", spec("non_arithmetic").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn verify_passes_and_wrong_sigma_fails_with_code_4() {
    let dir = TempDir::new().unwrap();
    let s = spec("non_arithmetic");
    let args = ["verify", s.to_str().unwrap(), "--t", "400", "--n", "200000", "--nonlattice"];
    let o = lclt(&dir.path().join("good"), &args);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 3);
    let mut wrong = args.to_vec();
    wrong.extend(["--sigma", "2.0"]);
    let o = lclt(&dir.path().join("bad"), &wrong);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("FAIL"));
    assert!(dir.path().join("bad/verify.csv").exists());
}

#[test]
fn verify_case_d_against_exact_oracle() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["--csv", "verify", spec("counterexample").to_str().unwrap(), "--t", "20.3", "--n", "300000", "--windows", "0"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "window,prediction,estimate,std_error,n,oracle,verdict");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_ne!(row[5], "n/a");
    assert_eq!(row[6], "PASS");
}

#[test]
fn spectral_fair_coin_curve_ends_at_minus_one() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["spectral", spec("fair_coin").to_str().unwrap(), "--points", "9"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("lambda_curve.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], std::f64::consts::PI);
    assert!((last[1] + 1.0).abs() < 1e-12 && last[2].abs() < 1e-12);
    assert!(dir.path().join("lambda_curve.gp").exists());
    assert!(stdout(&o).contains("M = (2)Z, r = 1"));
}

#[test]
fn renewal_scan_table_has_three_cells() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["renewal"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,frac_cell,sqrt_t_times_p,pruned_mass");
    assert_eq!(csv.lines().count(), 10);
    assert!(stdout(&o).contains("ratios 1.0000 : 0.66"));
}

#[test]
fn correlate_band_sets_vanish_between_returns() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["correlate", spec("band").to_str().unwrap(), "--n", "100000"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
    let joints: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (c[0], c[3])
        })
        .collect();
    assert!(joints.iter().filter(|(t, _)| *t > 50.15 && *t < 50.85).all(|(_, j)| *j == 0.0));
    assert!(joints[0].1 > 0.02);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let s = spec("non_arithmetic");
    let base = ["simulate", s.to_str().unwrap(), "--t", "100", "--n", "50000"];
    let one = lclt(&dir.path().join("one"), &[&["--workers", "1"][..], &base[..]].concat());
    let three = lclt(&dir.path().join("three"), &[&["--workers", "3"][..], &base[..]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(code(&three), 0);
    let read = |d: &str| fs::read(dir.path().join(d).join("lclt.csv")).unwrap();
    assert_eq!(read("one"), read("three"));
}

#[test]
fn manifest_replays_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let s = spec("non_arithmetic");
    let o = lclt(&first, &["--seed", "7", "simulate", s.to_str().unwrap(), "--t", "50", "--n", "20000"]);
    assert_eq!(code(&o), 0);
    let again = dir.path().join("again");
    let r = lclt(&again, &["replay", first.join("manifest.json").to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["manifest.json", "lclt.csv", "lclt.gp", "report.txt"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    let run: serde_json::Value = serde_json::from_slice(&fs::read(first.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 7);
    for key in ["system_hash", "git_describe", "wall_time_s"] {
        assert!(run.get(key).is_some(), "{key}");
    }
    let leftovers: Vec<_> = fs::read_dir(&first).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn replay_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    assert_eq!(code(&lclt(&first, &["renewal", "--t", "20.2,20.5"])), 0);
    let path = first.join("manifest.json");
    let text = fs::read_to_string(&path).unwrap();
    let mut m: serde_json::Value = serde_json::from_str(&text).unwrap();
    m["outputs"][0]["sha256"] = serde_json::json!("0".repeat(64));
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(code(&lclt(&dir.path().join("r1"), &["replay", path.to_str().unwrap()])), 4);
    m["config"]["command"]["times"] = serde_json::json!(["21.2"]);
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(code(&lclt(&dir.path().join("r2"), &["replay", path.to_str().unwrap()])), 2);
}

#[test]
fn json_report_is_machine_readable() {
    let dir = TempDir::new().unwrap();
    let o = lclt(dir.path(), &["--json", "predict", spec("counterexample").to_str().unwrap(), "--t", "100.3"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["case"], "D");
    assert!((v["value"].as_f64().unwrap() - 0.379).abs() < 1e-3);
    assert!(dir.path().join("report.json").exists());
}
