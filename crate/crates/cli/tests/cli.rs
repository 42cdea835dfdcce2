use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conecontrol"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is json")
}

fn file_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_reports_vectors_and_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate", spec("constant_cost.json").to_str().unwrap()]);
    assert!(o.status.success());
    let v = file_json(dir.path().join("validation.json"));
    assert_eq!(v, stdout_json(&o));
    let r = &v["report"];
    assert_eq!(r["vectors"]["u0_hat"][0], 1.0);
    assert_eq!(r["vectors"]["u1_hat"][0], 1.0);
    assert_eq!(r["vectors"]["a0"], 1.0);
    assert_eq!(r["nondegeneracy"]["holds"], true);
    assert_eq!(r["push_coercivity"]["holds"], false);
    assert_eq!(r["uniqueness_caveat"], true);
    assert_eq!(v["provenance"]["tool"], "conecontrol");
    assert_eq!(v["provenance"]["spec_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn solve_then_residual_passes() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("reflected_bm.json");
    let o = run(dir.path(), &["solve", s.to_str().unwrap(), "--r", "8", "--mesh", "0.01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["value.csv", "value_policy.csv", "value_summary.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let field = dir.path().join("value.csv");
    let o = run(dir.path(), &["residual", s.to_str().unwrap(), "--field", field.to_str().unwrap()]);
    assert!(o.status.success());
    let v = file_json(dir.path().join("residual.json"));
    assert_eq!(v["report"]["pass"], true);
    assert!(v["gradient_monotonicity_slack"].as_f64().unwrap() >= -1e-7);
}

#[test]
fn residual_rejects_field_from_other_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", spec("constant_cost.json").to_str().unwrap(), "--r", "2"]);
    assert!(o.status.success());
    let field = dir.path().join("value.csv");
    let o = run(
        dir.path(),
        &["residual", spec("reflected_bm.json").to_str().unwrap(), "--field", field.to_str().unwrap()],
    );
    assert!(!o.status.success());
    assert!(stdout_json(&o)["error"]["kind"].is_string());
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let s = spec("reflected_bm.json");
    let args = ["simulate", s.to_str().unwrap(), "--x", "0.5", "--paths", "200", "--seed", "7", "--horizon", "4"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run(a.path(), &args);
    let ob = run(b.path(), &args);
    assert!(oa.status.success());
    assert_eq!(oa.stdout, ob.stdout);
    let fa = std::fs::read(a.path().join("simulate.json")).unwrap();
    assert_eq!(fa, std::fs::read(b.path().join("simulate.json")).unwrap());
    let v = stdout_json(&oa);
    assert_eq!(v["provenance"]["seed"], 7);
    assert_eq!(v["estimate"]["n_paths"], 200);
}

#[test]
fn simulate_writes_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("reflected_bm.json");
    let o = run(
        dir.path(),
        &["simulate", s.to_str().unwrap(), "--x", "0", "--paths", "10", "--horizon", "1", "--dt", "0.01", "--path-csv"],
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("path_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,y1"));
    assert_eq!(lines.count(), 101);
}

#[test]
fn invalid_spec_gives_error_json_and_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut v = file_json(spec("constant_cost.json"));
    v["G"] = serde_json::json!([[1.0, 0.0]]);
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = run(dir.path(), &["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout_json(&o)["error"]["message"].is_string());

    std::fs::write(&bad, "{ not json").unwrap();
    let o = run(dir.path(), &["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"]["kind"], "json");
}

#[test]
fn reduce_two_queue_network() {
    let dir = tempfile::tempdir().unwrap();
    let bcp = dir.path().join("bcp.json");
    std::fs::write(
        &bcp,
        r#"{"R": [[1,0],[0,1]], "K": [[1,1]], "cost": {"form": "linear", "w": [1,2], "c": 0},
            "h": [1], "b": [-1,-1], "Sigma": [[1,0],[0,1]]}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["reduce", "--bcp", bcp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let lifted = dir.path().join("lifted_spec.json");
    assert!(lifted.exists());
    let o = run(dir.path(), &["validate", lifted.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_conecontrol"))
        .env("CONECONTROL_OUT_DIR", dir.path())
        .args(["validate", spec("linear_drift.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v = file_json(dir.path().join("validation.json"));
    assert_eq!(v["report"]["uniqueness_caveat"], true);
}
