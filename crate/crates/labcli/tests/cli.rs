//! End-to-end checks of the `lab` binary: exit codes, written artifacts and
//! report determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).output().expect("lab runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn run(config: &Path, experiment: &str, dir: &Path) -> Output {
    lab(&[
        "run",
        config.to_str().unwrap(),
        "--experiment",
        experiment,
        "--out",
        dir.to_str().unwrap(),
    ])
}

fn without_wall_time(mut v: Value) -> Value {
    for r in v["records"].as_array_mut().expect("records") {
        r.as_object_mut().expect("record").remove("wall_time");
    }
    v
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_scenarios_validate() {
    for name in ["default.toml", "degenerate.toml"] {
        let out = lab(&["validate", scenario(name).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn invalid_scenarios_exit_with_two_and_list_every_issue() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("default.toml")).unwrap();

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, text.replace("[geometry]", "[geometry]\nwarp = 3")).unwrap();
    assert_eq!(code(&lab(&["validate", unknown.to_str().unwrap()])), 2);

    let bad = dir.path().join("bad.toml");
    let broken = text
        .replace("base_resolution = [64, 64]", "base_resolution = [10, 64]")
        .replace("t = [1.0, 0.1, 0.01]", "t = [-1.0]");
    assert_ne!(broken, text, "the default scenario layout changed");
    std::fs::write(&bad, broken).unwrap();
    let out = lab(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.lines().count() >= 2, "{stderr}");
    assert_eq!(code(&run(&bad, "slag", dir.path())), 2);
}

#[test]
fn run_writes_json_csv_and_plots_and_report_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    for exp in ["slag", "decay"] {
        let out = run(&scenario("default.toml"), exp, dir.path());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        let report = read_json(&dir.path().join(format!("{exp}.json")));
        assert_eq!(report["schema_version"], 1);
        assert!(dir.path().join(format!("{exp}_{exp}.csv")).exists());
    }
    let svg = dir.path().join("decay_oscillation-vs-t.svg");
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
    let out = lab(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("C10") && stdout.contains("C11"), "{stdout}");
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(code(&run(&scenario("default.toml"), "slag", dir.path())), 0);
    }
    let read = |d: &tempfile::TempDir| without_wall_time(read_json(&d.path().join("slag.json")));
    assert_eq!(read(&a), read(&b));
}

#[test]
fn degenerate_scenario_marks_the_poincare_scan_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("degenerate.toml"), "poincare-scan", dir.path());
    assert_eq!(code(&out), 0);
    let report = read_json(&dir.path().join("poincare-scan.json"));
    let metric = &report["records"][0]["metrics"]["poincare_scan"];
    assert_eq!(metric, "not-applicable");
}

#[test]
fn converge_fits_orders_and_rejects_unsupported_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenario("default.toml");
    let args = |exp| {
        vec![
            "converge".to_string(),
            config.to_str().unwrap().to_string(),
            "--experiment".into(),
            exp,
            "--out".into(),
            dir.path().to_str().unwrap().to_string(),
        ]
    };
    let ok = Command::new(env!("CARGO_BIN_EXE_lab")).args(args("slag".into())).output().unwrap();
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let report = read_json(&dir.path().join("converge-slag.json"));
    assert!(report["records"][0]["metrics"]["order_holomorphic_residual"].is_object());
    assert!(dir.path().join("converge-slag_convergence.csv").exists());
    let bad = Command::new(env!("CARGO_BIN_EXE_lab")).args(args("decay".into())).output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn non_positive_fiber_area_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&[
        "run",
        scenario("default.toml").to_str().unwrap(),
        "--experiment",
        "slag",
        "--t",
        "-0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}
