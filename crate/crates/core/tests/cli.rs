use std::path::{Path, PathBuf};
use std::process::Command;

use adaptive_polyopt::harness::trace::parse_trace;
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_adaptive-polyopt");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join("configs")
}

fn minimal() -> Value {
    let text = std::fs::read_to_string(configs_dir().join("c11_minimal.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn run(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(BIN)
        .args(args)
        .env("ADAPTIVE_POLYOPT_OUT", out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn run_dir(out: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("run-"))
        .collect();
    assert_eq!(dirs.len(), 1);
    dirs.pop().unwrap()
}

#[test]
fn minimal_run_writes_one_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &minimal());
    let out = tmp.path().join("out");
    let (code, stdout, _) = run(&["run", cfg.to_str().unwrap()], &out);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("cell-")).count(), 1);
    let dir = run_dir(&out);
    let bytes = std::fs::read(dir.join("cell-000-seed-1.csv")).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().count(), 101);
    let (rows, _) = parse_trace(&bytes).unwrap();
    assert!(rows.iter().all(|r| r.zeta_norm.is_none()));

    let (code, _, _) = run(&["--quiet", "postprocess", dir.to_str().unwrap()], &out);
    assert_eq!(code, 0);
    let (rows, _) = parse_trace(&std::fs::read(dir.join("cell-000-seed-1.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.zeta_norm == Some(0.0)));

    let summary: Value =
        serde_json::from_slice(&std::fs::read(dir.join("cell-000-seed-1.summary.json")).unwrap()).unwrap();
    let r = &summary["report"];
    let cost: f64 = rows.iter().map(|r| r.cost).sum();
    let eps0: f64 = rows.iter().map(|r| r.eps0).sum();
    assert_eq!(r["total_cost"].as_f64().unwrap(), cost);
    assert_eq!(r["sum_eps0"].as_f64().unwrap(), eps0);
    assert_eq!(r["proj_grad_sq"].as_array().unwrap().len(), 100);

    let dat = std::fs::read_to_string(dir.join("plot").join("cell-000-seed-1.dat")).unwrap();
    let last: Vec<f64> = dat
        .lines()
        .last()
        .unwrap()
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    let lr = r["local_regret"].as_f64().unwrap();
    assert!((last[1] * 100.0 - lr).abs() <= 1e-9 * lr.max(1.0));
}

#[test]
fn same_config_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = minimal();
    v["est"] = json!({"kind": "gradient", "iota": 0.05});
    v["system"]["obs_law"]["bound"] = json!(0.05);
    let cfg = write_config(tmp.path(), "c.json", &v);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["--quiet", "run", cfg.to_str().unwrap()], &a).0, 0);
    assert_eq!(run(&["--quiet", "--jobs", "2", "run", cfg.to_str().unwrap()], &b).0, 0);
    let (da, db) = (run_dir(&a), run_dir(&b));
    assert_eq!(da.file_name(), db.file_name());
    for f in ["cell-000-seed-1.csv", "summary.json", "config.json"] {
        assert_eq!(std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &minimal());
    let out = tmp.path().join("o");
    assert_eq!(run(&["--quiet", "run", cfg.to_str().unwrap()], &out).0, 0);
    assert_eq!(
        run(&["--quiet", "--seed-override", "5,6", "run", cfg.to_str().unwrap()], &out).0,
        0
    );
    let n = std::fs::read_dir(&out).unwrap().count();
    assert_eq!(n, 2);
}

#[test]
fn horizon_sweep_reports_each_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = minimal();
    v["experiment"] = json!({"kind": "sweep", "sweep_axis": "T", "values": [200, 800]});
    v["outputs"] = json!({"trace_csv": false, "plot_data": false});
    let cfg = write_config(tmp.path(), "c.json", &v);
    let out = tmp.path().join("o");
    assert_eq!(run(&["--quiet", "run", cfg.to_str().unwrap()], &out).0, 0);
    let summary: Value = serde_json::from_slice(&std::fs::read(run_dir(&out).join("summary.json")).unwrap()).unwrap();
    let by_value = summary["by_value"].as_array().unwrap();
    assert_eq!(by_value.len(), 2);
    assert!(by_value.iter().all(|e| e["mean_local_regret"].as_f64().unwrap() > 0.0));
    assert_eq!(summary["cells"][1]["horizon"], json!(800));
}

#[test]
fn invalid_config_exits_with_field_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = minimal();
    v["seeds"] = json!([]);
    v["schema_version"] = json!(3);
    let cfg = write_config(tmp.path(), "bad.json", &v);
    let (code, _, stderr) = run(&["check", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("schema_version:") && stderr.contains("seeds:"), "{stderr}");

    let mut v = minimal();
    v["alg"]["step"] = json!(1);
    let cfg = write_config(tmp.path(), "bad2.json", &v);
    let (code, _, stderr) = run(&["run", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("step"), "{stderr}");
}

#[test]
fn divergence_exits_with_cell_id() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = minimal();
    v["system"]["theta_set"] = json!({"kind": "box", "lo": [-50.0], "hi": [-40.0]});
    v["system"]["cost"]["theta_bar"] = json!(-45.0);
    v["alg"]["eta"] = json!(0.0);
    let cfg = write_config(tmp.path(), "div.json", &v);
    let (code, _, stderr) = run(&["run", cfg.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(code, 3);
    assert!(stderr.contains("cell-000-seed-1"), "{stderr}");
}

#[test]
fn tampered_trace_fails_postprocess() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &minimal());
    let out = tmp.path().join("o");
    assert_eq!(run(&["--quiet", "run", cfg.to_str().unwrap()], &out).0, 0);
    let dir = run_dir(&out);
    let csv = dir.join("cell-000-seed-1.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let truncated: String = text.lines().take(50).map(|l| format!("{l}\n")).collect();
    std::fs::write(&csv, truncated).unwrap();
    let (code, _, stderr) = run(&["postprocess", dir.to_str().unwrap()], &out);
    assert_eq!(code, 4, "{stderr}");
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let (code, stdout, stderr) = run(&["check", path.to_str().unwrap()], Path::new("unused"));
        assert_eq!(code, 0, "{}: {stderr}", path.display());
        assert!(stdout.starts_with("ok:"));
    }
}
