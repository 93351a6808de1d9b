use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn cbrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbrw"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn malthus_writes_nu() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbrw(&["malthus", "--config", path_str(&example("ex1_d1.json")), "--out", path_str(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("malthus.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let nu = v["nu"].as_f64().unwrap();
    assert!((nu - (2f64.sqrt() - 1.0)).abs() < 1e-9, "{nu}");
    assert_eq!(v["config"]["model"]["dimension"], 1);
}

#[test]
fn front_svg_spans_the_axis_extent() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbrw(&[
        "front",
        "--config",
        path_str(&example("ex2a.json")),
        "--out",
        path_str(dir.path()),
        "--nu",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("front.svg")).unwrap();
    let start = svg.find("points=\"").unwrap() + 8;
    let end = start + svg[start..].find('"').unwrap();
    let xs: Vec<f64> = svg[start..end]
        .split_whitespace()
        .map(|p| p.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(xs.len(), 720);
    let max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let min = xs.iter().cloned().fold(f64::MAX, f64::min);
    assert!((max - 1.1345930).abs() < 1e-6, "{max}");
    assert!((min + 1.1345930).abs() < 1e-6, "{min}");
}

#[test]
fn front_csv_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = cbrw(&[
            "front",
            "--config",
            path_str(&example("ex2a.json")),
            "--out",
            path_str(d.path()),
            "--format",
            "csv",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let fa = std::fs::read(a.path().join("front.csv")).unwrap();
    let fb = std::fs::read(b.path().join("front.csv")).unwrap();
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn simulate_writes_snapshot_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"dimension": 1, "q": 1.0, "law": {"kind": "nearest-neighbor"}},
            "catalysts": [{"position": [0], "alpha": 0.5, "offspring": {"kind": "deterministic", "count": 2}}],
            "simulate": {"horizon": 4.0, "checkpoints": [2.0, 4.0], "runs": 5, "seed": 3}}"#,
    );
    let out = cbrw(&["simulate", "--config", path_str(&cfg), "--out", path_str(dir.path()), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    assert!(csv.starts_with("replicate,t,particle_index,x_1\n"));
    assert!(csv.lines().count() > 5);
}

#[test]
fn model_check_reports_recurrence() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbrw(&["model-check", "--config", path_str(&example("ex2a.json")), "--out", path_str(dir.path())]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("model-check.json")).unwrap()).unwrap();
    assert_eq!(v["recurrent"], true);
    assert_eq!(v["classification"]["regime"], "supercritical");
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_alpha = write_config(
        dir.path(),
        r#"{"model": {"dimension": 1, "q": 1.0, "law": {"kind": "nearest-neighbor"}},
            "catalysts": [{"position": [0], "alpha": 1.0, "offspring": {"kind": "deterministic", "count": 2}}]}"#,
    );
    let out = cbrw(&["malthus", "--config", path_str(&bad_alpha)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("catalysts[0].alpha"));

    let unknown = write_config(
        dir.path(),
        r#"{"model": {"dimension": 1, "q": 1.0, "law": {"kind": "nearest-neighbor"}, "drift": 1},
            "catalysts": [{"position": [0], "alpha": 0.5, "offspring": {"kind": "deterministic", "count": 2}}]}"#,
    );
    let out = cbrw(&["malthus", "--config", path_str(&unknown)]);
    assert_eq!(out.status.code(), Some(2));

    let out = cbrw(&["malthus", "--config", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn subcritical_system_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"dimension": 3, "q": 1.0, "law": {"kind": "nearest-neighbor"}},
            "catalysts": [{"position": [0, 0, 0], "alpha": 0.2, "offspring": {"kind": "deterministic", "count": 2}}]}"#,
    );
    let out = cbrw(&["malthus", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbrw(&[
        "verify",
        "--config",
        path_str(&example("ex1_d1.json")),
        "--out",
        path_str(dir.path()),
        "--only",
        "1,2,6",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.contains(" PASS ")).count(), 3, "{stdout}");
    assert!(dir.path().join("verify.json").exists());
}
