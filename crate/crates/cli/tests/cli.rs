use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn qdmd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdmd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn base_config() -> Value {
    json!({
        "version": 1,
        "system": {"drift": [0.0, 0.0, std::f64::consts::PI], "controls": [[1.0, 0.0, 0.0]]},
        "controls": [{"kind": "pure_tone", "frequency": 1.1, "amplitude": 1.0}],
        "sampling": {"dt": 0.0625, "t_end": 5.0},
        "initial_state": [0.0, 0.0, 1.0],
        "noise": {"sigma": 0.01, "seed": 7},
        "algorithm": {"kind": "bidmd", "pairing": "trapezoid"}
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

/// Data rows of a trajectory CSV as numbers.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_writes_uniform_grid() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    let out = qdmd(
        &["simulate", "--config", "cfg.json", "--out", "run"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let data = rows(&tmp.path().join("run/trajectory.csv"));
    assert_eq!(data.len(), 81);
    for (m, r) in data.iter().enumerate() {
        assert_eq!(r.len(), 5);
        assert!((r[0] - m as f64 / 16.0).abs() < 1e-12);
    }
}

#[test]
fn zero_control_preserves_bloch_norm() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["controls"] = json!([{"kind": "pure_tone", "frequency": 1.1, "amplitude": 0.0}]);
    cfg["noise"]["sigma"] = json!(0.0);
    cfg["initial_state"] = json!([0.6, 0.0, 0.8]);
    write_config(tmp.path(), "cfg.json", &cfg);
    let out = qdmd(
        &["simulate", "--config", "cfg.json", "--out", "run"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for r in rows(&tmp.path().join("run/trajectory.csv")) {
        let norm = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
        assert!((norm - 1.0).abs() < 1e-8);
        assert_eq!(r[4], 0.0);
    }
}

#[test]
fn noisy_simulation_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    for dir in ["a", "b"] {
        assert_eq!(
            code(&qdmd(
                &["simulate", "--config", "cfg.json", "--out", dir],
                tmp.path()
            )),
            0
        );
    }
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "cfg.json", "--seed", "8", "--out", "c"],
            tmp.path()
        )),
        0
    );
    let read = |d: &str| fs::read(tmp.path().join(d).join("trajectory.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn json_trajectory_format() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    let out = qdmd(
        &[
            "simulate", "--config", "cfg.json", "--format", "json", "--out", "run",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/trajectory.json")).unwrap())
            .unwrap();
    assert_eq!(v["times"].as_array().unwrap().len(), 81);
    assert_eq!(v["states"][0].as_array().unwrap().len(), 3);
    assert_eq!(v["seed"], json!(7));
}

#[test]
fn malformed_config_exits_2_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("bad.json"),
        "{\n  \"version\": 1,\n  \"sytem\": {}\n}\n",
    )
    .unwrap();
    let out = qdmd(
        &["simulate", "--config", "bad.json", "--out", "run"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("bad.json:3:"), "{msg}");
    assert!(msg.contains("sytem"), "{msg}");

    let mut cfg = base_config();
    cfg["initial_state"] = json!([0.0, 1.0]);
    write_config(tmp.path(), "short.json", &cfg);
    let out = qdmd(
        &["simulate", "--config", "short.json", "--out", "run"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("initial_state"), "{}", stderr(&out));
}

#[test]
fn invalid_thread_cap_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    let out = Command::new(env!("CARGO_BIN_EXE_qdmd"))
        .args(["simulate", "--config", "cfg.json", "--out", "run"])
        .env("QDMD_THREADS", "zero")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn empty_trajectory_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    fs::write(tmp.path().join("empty.csv"), "").unwrap();
    let out = qdmd(
        &["fit", "--config", "cfg.json", "--out", "run", "empty.csv"],
        tmp.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn floquet_fit_without_period_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["noise"]["sigma"] = json!(0.0);
    cfg["algorithm"] = json!({"kind": "floquet", "samples_per_period": 4});
    write_config(tmp.path(), "cfg.json", &cfg);
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "cfg.json", "--out", "run"],
            tmp.path()
        )),
        0
    );
    let path = tmp.path().join("run/trajectory.csv");
    let text: String = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("# T="))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&path, text).unwrap();
    let out = qdmd(
        &[
            "fit",
            "--config",
            "cfg.json",
            "--out",
            "run",
            "run/trajectory.csv",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("drive period"), "{}", stderr(&out));
}

#[test]
fn floquet_fit_reads_period_from_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["noise"]["sigma"] = json!(0.0);
    cfg["sampling"] =
        json!({"period": 1.0 / 1.1, "samples_per_period": 4, "periods": 5, "substeps": 256});
    cfg["algorithm"] = json!({"kind": "floquet", "samples_per_period": 4});
    write_config(tmp.path(), "cfg.json", &cfg);
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "cfg.json", "--out", "run"],
            tmp.path()
        )),
        0
    );
    let out = qdmd(
        &[
            "fit",
            "--config",
            "cfg.json",
            "--out",
            "run",
            "run/trajectory.csv",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/report.json")).unwrap())
            .unwrap();
    let err = report["metrics"]["quasi_energy_error_vs_monodromy"]
        .as_f64()
        .unwrap();
    assert!(err < 1e-6, "quasi-energy error {err}");
    assert!(tmp.path().join("run/quasi_energies.csv").exists());
}

#[test]
fn fit_then_predict_with_truth() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "cfg.json", "--out", "run"],
            tmp.path()
        )),
        0
    );
    let out = qdmd(
        &[
            "fit",
            "--config",
            "cfg.json",
            "--out",
            "run",
            "run/trajectory.csv",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = qdmd(
        &[
            "predict",
            "--model",
            "run/model.json",
            "--config",
            "cfg.json",
            "--steps",
            "80",
            "--truth",
            "run/trajectory.csv",
            "--out",
            "pred",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("pred/prediction.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x1,x2,x3,rel_err_pct");
    assert_eq!(text.lines().count(), 82);
    let report: Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("pred/predict_report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["metrics"]["relative_error"].as_f64().unwrap() < 0.1);
}

#[test]
fn predict_zero_steps_echoes_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["controls"] = json!([{"kind": "pure_tone", "frequency": 1.1, "amplitude": 0.0}]);
    write_config(tmp.path(), "cfg.json", &cfg);
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "cfg.json", "--out", "run"],
            tmp.path()
        )),
        0
    );
    assert_eq!(
        code(&qdmd(
            &[
                "fit",
                "--config",
                "cfg.json",
                "--out",
                "run",
                "run/trajectory.csv"
            ],
            tmp.path()
        )),
        0
    );
    let out = qdmd(
        &[
            "predict",
            "--model",
            "run/model.json",
            "--config",
            "cfg.json",
            "--x0",
            "0.1,-0.2,0.3",
            "--steps",
            "0",
            "--out",
            "pred",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let data = rows(&tmp.path().join("pred/prediction.csv"));
    assert_eq!(data, vec![vec![0.0, 0.1, -0.2, 0.3]]);
}

#[test]
fn predict_dimension_mismatch_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "cfg.json", "--out", "run"],
            tmp.path()
        )),
        0
    );
    assert_eq!(
        code(&qdmd(
            &[
                "fit",
                "--config",
                "cfg.json",
                "--out",
                "run",
                "run/trajectory.csv"
            ],
            tmp.path()
        )),
        0
    );
    let out = qdmd(
        &[
            "predict",
            "--model",
            "run/model.json",
            "--x0",
            "0.1,0.2",
            "--out",
            "pred",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn report_config_echo_reparses() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.json", &base_config());
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "cfg.json", "--out", "run"],
            tmp.path()
        )),
        0
    );
    assert_eq!(
        code(&qdmd(
            &[
                "fit",
                "--config",
                "cfg.json",
                "--out",
                "run",
                "run/trajectory.csv"
            ],
            tmp.path()
        )),
        0
    );
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/report.json")).unwrap())
            .unwrap();
    let echo = report["config"].clone();
    write_config(tmp.path(), "echo.json", &echo);
    assert_eq!(
        code(&qdmd(
            &["simulate", "--config", "echo.json", "--out", "again"],
            tmp.path()
        )),
        0
    );
    assert_eq!(
        fs::read(tmp.path().join("run/trajectory.csv")).unwrap(),
        fs::read(tmp.path().join("again/trajectory.csv")).unwrap()
    );
    assert_eq!(
        code(&qdmd(
            &[
                "fit",
                "--config",
                "echo.json",
                "--out",
                "again",
                "again/trajectory.csv"
            ],
            tmp.path()
        )),
        0
    );
    let again: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("again/report.json")).unwrap())
            .unwrap();
    assert_eq!(again["config"], echo);
}

#[test]
fn bundle_manifest_documents_every_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qdmd(&["example", "1", "--out", "ex1"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let root = tmp.path().join("ex1");
    let manifest: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
    for entry in fs::read_dir(&root).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name == "manifest.json" {
            continue;
        }
        let listed = manifest
            .iter()
            .find(|e| e["file"] == json!(name))
            .unwrap_or_else(|| panic!("{name} not in manifest"));
        if name.ends_with(".csv") {
            let header = fs::read_to_string(root.join(&name))
                .unwrap()
                .lines()
                .find(|l| !l.starts_with('#'))
                .unwrap()
                .to_string();
            let cols: Vec<String> = listed["columns"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c.as_str().unwrap().to_string())
                .collect();
            assert_eq!(header, cols.join(","), "{name}");
        }
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(root.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["extrapolation_periods"], json!(5.0));
    assert!(report.get("timings_ms").is_none());
}

#[test]
fn example_timings_are_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qdmd(&["example", "2", "--timings", "--out", "ex2"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ex2/report.json")).unwrap())
            .unwrap();
    assert!(report["timings_ms"]["run"].as_f64().is_some());
}
