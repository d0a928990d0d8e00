use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn default_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default")
}

fn topoman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topoman")).args(args).env_remove("TOPOMAN_OUT").output().expect("binary runs")
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

/// Scenario in a fresh directory reusing the default topology.
fn scenario(extra: Value, trace: Value) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(default_dir().join("topology.json"), dir.path().join("topology.json")).unwrap();
    write_json(dir.path(), "trace.json", &trace);
    let mut doc = json!({"topology": "topology.json", "trace": "trace.json"});
    doc.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    let path = write_json(dir.path(), "scenario.json", &doc);
    (dir, path)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_default_scenario() {
    let out = topoman(&["validate", "--scenario", s(&default_dir().join("scenario.json"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_names_dangling_link() {
    let (dir, path) = scenario(json!({}), json!([]));
    let mut topo: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("topology.json")).unwrap()).unwrap();
    topo["links"]
        .as_array_mut()
        .unwrap()
        .push(json!({"id": "dangling", "a": "h1", "b": "ghost", "bw": 5, "latency": 1}));
    write_json(dir.path(), "topology.json", &topo);
    let out = topoman(&["validate", "--scenario", s(&path)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dangling") && err.contains("ghost"), "{err}");
}

#[test]
fn missing_file_is_named() {
    let (dir, path) = scenario(json!({}), json!([]));
    fs::remove_file(dir.path().join("trace.json")).unwrap();
    let out = topoman(&["validate", "--scenario", s(&path)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trace.json"));
    let out = topoman(&["run", "--scenario", "/no/such/scenario.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/scenario.json"));
}

#[test]
fn run_writes_consistent_outputs_without_touching_inputs() {
    let before: Vec<Vec<u8>> = ["scenario.json", "topology.json", "trace.json"]
        .iter()
        .map(|f| fs::read(default_dir().join(f)).unwrap())
        .collect();
    let out_dir = tempfile::tempdir().unwrap();
    let out = topoman(&["run", "--scenario", s(&default_dir().join("scenario.json")), "--out", s(out_dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(out_dir.path().join("utilization.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tick,cpu,mem,overall"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1..].iter().all(|x| (0.0..=1.0).contains(x)), "{line}");
        assert_eq!(v[3], (v[1] + v[2]) / 2.0);
    }
    let log = fs::read_to_string(out_dir.path().join("events.log")).unwrap();
    assert!(log.lines().all(|l| l.splitn(4, ',').count() == 4));
    let cache: Value = serde_json::from_str(&fs::read_to_string(out_dir.path().join("cache.json")).unwrap()).unwrap();
    assert_eq!(
        cache["cache"]["computations"],
        json!(cache["cache"]["misses"].as_u64().unwrap() + cache["cache"]["stale_recomputes"].as_u64().unwrap())
    );
    assert!(out_dir.path().join("decisions.csv").exists());

    let after: Vec<Vec<u8>> = ["scenario.json", "topology.json", "trace.json"]
        .iter()
        .map(|f| fs::read(default_dir().join(f)).unwrap())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn env_output_fallback_and_flag_precedence() {
    let (dir, path) = scenario(json!({}), json!([]));
    let env_out = dir.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_topoman"))
        .args(["run", "--scenario", s(&path)])
        .env("TOPOMAN_OUT", &env_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_out.join("utilization.csv").exists());

    let flag_out = dir.path().join("from-flag");
    let status = Command::new(env!("CARGO_BIN_EXE_topoman"))
        .args(["run", "--scenario", s(&path), "--out", s(&flag_out)])
        .env("TOPOMAN_OUT", &env_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flag_out.join("events.log").exists());
}

#[test]
fn strict_realistic_rejects_everything() {
    let (dir, path) = scenario(
        json!({"realistic": {"theta": 1.0}}),
        serde_json::from_str(&fs::read_to_string(default_dir().join("trace.json")).unwrap()).unwrap(),
    );
    let out_dir = dir.path().join("out");
    let out = topoman(&["run", "--scenario", s(&path), "--scheme", "realistic", "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cache: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("cache.json")).unwrap()).unwrap();
    assert_eq!(cache["scheme"], "realistic");
    assert_eq!(cache["admitted"], 0);
    let csv = fs::read_to_string(out_dir.join("utilization.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0,0,0")), "{csv}");
}

#[test]
fn compare_outputs() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = topoman(&["compare", "--scenario", s(&default_dir().join("scenario.json")), "--out", s(out_dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for scheme in ["proposed", "realistic", "capacity-aware"] {
        assert!(out_dir.path().join(format!("utilization_{scheme}.csv")).exists());
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scheme_means"].as_object().unwrap().len(), 3);
    assert!(report["proposed_below_baseline_average"].is_boolean());
    assert!(fs::read_to_string(out_dir.path().join("report.csv"))
        .unwrap()
        .starts_with("scheme,cpu,mem,overall,asymmetry\n"));
}

#[test]
fn compare_degenerate_cases() {
    let (dir, path) = scenario(json!({}), json!([]));
    let out = topoman(&["compare", "--scenario", s(&path), "--out", s(&dir.path().join("empty"))]);
    assert!(out.status.success());
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("empty/report.json")).unwrap()).unwrap();
    assert_eq!(report["proposed_below_baseline_average"], json!(true));
    for m in report["scheme_means"].as_object().unwrap().values() {
        assert_eq!(m["overall"], json!(0.0));
    }

    let (dir, path) = scenario(json!({"schemes": ["proposed"]}), json!([]));
    let out = topoman(&["compare", "--scenario", s(&path), "--out", s(&dir.path().join("single"))]);
    assert!(out.status.success());
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("single/report.json")).unwrap()).unwrap();
    assert_eq!(report["scheme_means"].as_object().unwrap().len(), 1);
    assert!(report["proposed_below_baseline_average"].is_null());
}

#[test]
fn gen_trace_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(default_dir().join("topology.json"), dir.path().join("topology.json")).unwrap();
    let path = write_json(
        dir.path(),
        "scenario.json",
        &json!({
            "topology": "topology.json",
            "generator": {"count": 12, "cpu": [1, 4], "mem": [1, 4], "duration": [1, 5],
                          "interarrival": [0, 2], "sources": ["gw"], "targets": ["h1"]},
            "seed": 3
        }),
    );
    let gen = |seed: Option<&str>, out: &str| {
        let out_dir = dir.path().join(out);
        let mut args = vec!["gen-trace", "--scenario", s(&path), "--out", s(&out_dir)];
        if let Some(seed) = seed {
            args.extend(["--seed", seed]);
        }
        let o = topoman(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out_dir.join("trace.json")).unwrap()
    };
    let a = gen(None, "a");
    assert_eq!(a, gen(Some("3"), "b"));
    assert_ne!(a, gen(Some("4"), "c"));
    assert_eq!(serde_json::from_str::<Value>(&a).unwrap().as_array().unwrap().len(), 12);
}
