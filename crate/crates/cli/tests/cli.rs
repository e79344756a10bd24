use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stderr: String,
    report: Option<Value>,
    out: PathBuf,
}

fn conformal(dir: &Path, config: &Value, out: &str, cache: &str, extra: &[&str]) -> Run {
    let cfg_path = dir.join(format!("{out}.json"));
    fs::write(&cfg_path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    let out_dir = dir.join(out);
    let Output { status, stderr, .. } = Command::new(env!("CARGO_BIN_EXE_conformal"))
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .args(extra)
        .env("CACHE_DIR", dir.join(cache))
        .output()
        .unwrap();
    let report = fs::read(out_dir.join("report.json")).ok().map(|b| serde_json::from_slice(&b).unwrap());
    Run { code: status.code().unwrap(), stderr: String::from_utf8(stderr).unwrap(), report, out: out_dir }
}

fn swap() -> Value {
    json!({"system": {"preset": "finite_permutation", "table": [1, 0, 2], "values": [0, 4, 1]}, "n_max": 20})
}

fn constant() -> Value {
    json!({"system": {"preset": "rotation", "grid": 64, "factor": {"kind": "constant", "value": 0.2}}, "n_max": 100})
}

fn with(mut base: Value, extra: Value) -> Value {
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    base
}

fn payload(run: &Run) -> &Value {
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    &run.report.as_ref().unwrap()["payload"]
}

#[test]
fn admissible_swap_has_exact_gap() {
    let dir = TempDir::new().unwrap();
    let run = conformal(dir.path(), &with(swap(), json!({"command": "admissible"})), "a", "cache", &[]);
    let set = &payload(&run)["admissible"];
    assert_eq!(set["exact_gap"], json!(["1", "2"]));
    assert_eq!(set["rays"], json!([[null, 1.0], [2.0, null]]));
    assert_eq!(set["exact"], json!(true));
    assert_eq!(set["zero_removed"], json!(true));
    assert!(run.report.unwrap()["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn admissible_constant_excludes_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = with(constant(), json!({"command": "admissible", "k_range": "-0.4:0.4:0.2"}));
    let run = conformal(dir.path(), &cfg, "c", "cache", &[]);
    let p = payload(&run);
    let gap = p["admissible"]["gap"].as_array().unwrap();
    assert!(gap.iter().all(|v| (v.as_f64().unwrap() - 0.2).abs() < 1e-12));
    assert_eq!(p["admissible"]["zero_removed"], json!(true));
    let member: Vec<bool> = p["phase"].as_array().unwrap().iter().map(|r| r["admissible"].as_bool().unwrap()).collect();
    // k = -0.4, -0.2, 0 (removed), 0.2 (gap), 0.4
    assert_eq!(member, vec![true, true, false, false, true]);
    let phase = fs::read_to_string(run.out.join("phase.csv")).unwrap();
    assert_eq!(phase.lines().count(), 6);
}

#[test]
fn rank_of_one_and_s() {
    let dir = TempDir::new().unwrap();
    let run = conformal(dir.path(), &json!({"command": "rank", "generators": "1, s"}), "r", "cache", &[]);
    assert_eq!(payload(&run)["rank"], json!(2));
    let run = conformal(dir.path(), &json!({"command": "rank", "generators": "3/7, 5/7"}), "r2", "cache", &[]);
    assert_eq!(payload(&run)["rank"], json!(1));
}

#[test]
fn admissible_gap_matches_optimize_on_finite_sets() {
    let dir = TempDir::new().unwrap();
    let systems = [
        json!({"preset": "finite_permutation", "table": [1, 0, 2], "values": [0, 4, 1]}),
        json!({"preset": "finite_permutation", "table": [2, 0, 1, 4, 3], "values": ["1/3", -2, 5, 7, "-1/2"]}),
        json!({"preset": "finite_permutation", "table": [0], "values": [3]}),
    ];
    for (i, sys) in systems.into_iter().enumerate() {
        let adm = conformal(dir.path(), &json!({"system": sys, "command": "admissible"}), &format!("a{i}"), "cache", &[]);
        let opt = conformal(dir.path(), &json!({"system": sys, "command": "optimize"}), &format!("o{i}"), "cache", &[]);
        let (adm, opt) = (payload(&adm), payload(&opt));
        assert_eq!(opt["exact"], json!(true));
        assert_eq!(adm["admissible"]["exact_gap"], json!([opt["maxmin"]["exact_value"], opt["minmax"]["exact_value"]]));
    }
}

#[test]
fn repeated_run_is_served_from_cache() {
    let dir = TempDir::new().unwrap();
    let cfg = with(constant(), json!({"command": "probe", "k": 0.2}));
    let first = conformal(dir.path(), &cfg, "p", "cache", &[]);
    let second = conformal(dir.path(), &cfg, "p", "cache", &[]);
    let (a, b) = (first.report.as_ref().unwrap(), second.report.as_ref().unwrap());
    assert_eq!(a["provenance"]["cache"], json!("miss"));
    assert_eq!(b["provenance"]["cache"], json!("hit"));
    assert_eq!(a["payload"], b["payload"]);
    assert!(second.out.join("trace.csv").exists());

    let third = conformal(dir.path(), &cfg, "p", "cache", &["--n-max", "50"]);
    assert_eq!(third.report.unwrap()["provenance"]["cache"], json!("miss"));
}

#[test]
fn corrupt_cache_entry_is_a_miss_with_warning() {
    let dir = TempDir::new().unwrap();
    let cfg = with(swap(), json!({"command": "optimize"}));
    let first = conformal(dir.path(), &cfg, "o", "cache", &[]);
    let hash = first.report.as_ref().unwrap()["provenance"]["config_hash"].as_str().unwrap().to_string();
    fs::write(dir.path().join("cache").join(format!("{hash}.json")), b"{\"key\": 1").unwrap();
    let second = conformal(dir.path(), &cfg, "o", "cache", &[]);
    let report = second.report.as_ref().unwrap();
    assert_eq!(second.code, 0);
    assert_eq!(report["provenance"]["cache"], json!("miss"));
    assert!(report["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("corrupt")));
    let diag: Value = serde_json::from_str(second.stderr.lines().next().unwrap()).unwrap();
    assert_eq!(diag["level"], json!("warning"));
    assert_eq!(report["payload"], first.report.unwrap()["payload"]);
}

#[test]
fn payloads_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let strict = json!({"preset": "strict_rotation", "grid": 64});
    let configs = [
        with(constant(), json!({"command": "probe", "k_range": "-0.5:0.5:0.25"})),
        json!({"system": strict, "command": "probe", "k": 0.0, "n_max": 2000}),
        json!({"system": strict, "command": "construct", "k": 1.0, "samples": 200, "seed": 7}),
        json!({"system": {"preset": "rotation", "grid": 64,
                          "factor": {"kind": "trig", "terms": [{"freq": 1, "cos": 1.0}, {"freq": 2, "sin": 0.5}]}},
               "command": "optimize", "method": {"kind": "grid_descent", "sweeps": 50}}),
    ];
    for (i, cfg) in configs.iter().enumerate() {
        let a = conformal(dir.path(), cfg, &format!("d{i}a"), "cache-a", &[]);
        let b = conformal(dir.path(), cfg, &format!("d{i}b"), "cache-b", &[]);
        let bytes = |r: &Run| serde_json::to_string(&payload(r)).unwrap();
        assert_eq!(bytes(&a), bytes(&b), "config {i}");
        assert_eq!(a.report.unwrap()["provenance"]["cache"], json!("miss"));
    }
}

#[test]
fn heuristic_results_carry_warnings() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"system": {"preset": "rotation", "grid": 64,
                                "factor": {"kind": "trig", "terms": [{"freq": 1, "cos": 1.0}]}},
                     "command": "optimize", "n_max": 50});
    let run = conformal(dir.path(), &cfg, "h", "cache", &[]);
    let report = run.report.as_ref().unwrap();
    assert_eq!(report["payload"]["exact"], json!(false));
    assert!(!report["warnings"].as_array().unwrap().is_empty());
    let run = conformal(dir.path(), &with(cfg, json!({"command": "admissible"})), "h2", "cache", &[]);
    let report = run.report.as_ref().unwrap();
    assert_eq!(report["payload"]["limits"]["error_bound"], json!("heuristic"));
    assert!(report["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("no error bound")));
}

#[test]
fn strict_probe_verdicts() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"system": {"preset": "strict_rotation", "grid": 256}, "command": "probe", "n_max": 10000});
    let run = conformal(dir.path(), &cfg, "s", "cache", &["--k-range", "0:0.5:0.5", "--strict-verdict"]);
    let probes = payload(&run)["probes"].as_array().unwrap().clone();
    assert_eq!(probes[0]["verdict"], json!("recurrent_evidence"));
    assert_eq!(probes[1]["verdict"], json!("escape_certified"));
    assert_eq!(probes[1]["rigorous"], json!(true));
}

#[test]
fn elasticity_from_csv_profiles() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("profiles.csv"), "first,mixed\n-1,1\n-1,-0.5\n-1,\n").unwrap();
    let cfg = json!({"command": "elasticity", "profile": {"csv": "profiles.csv"}});
    let run = conformal(dir.path(), &cfg, "e", "cache", &[]);
    let profiles = payload(&run)["profiles"].as_array().unwrap().clone();
    assert_eq!(profiles[0]["first_kind"], json!(true));
    assert_eq!(profiles[0]["elasticity"]["forbidden"], json!([[0.0, 0.0]]));
    assert_eq!(profiles[1]["samples"], json!(2));
    // (1+u)/u: 2 for u = 1, -1 for u = -1/2
    assert_eq!(profiles[1]["elasticity"]["forbidden"], json!([[-1.0, -1.0], [2.0, 2.0]]));
    let csv = fs::read_to_string(run.out.join("forbidden.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn mapping_torus_elasticity_avoids_the_gap() {
    let dir = TempDir::new().unwrap();
    let cfg = with(constant(), json!({"command": "elasticity", "k": 1.0}));
    let run = conformal(dir.path(), &cfg, "m", "cache", &[]);
    let p = payload(&run);
    assert_eq!(p["mapping_torus"]["scaled_gap_check"]["covered"], json!(true));
    assert_eq!(p["profiles"][0]["elasticity"]["equality"], json!(true));
}

#[test]
fn validation_errors_exit_2_with_json() {
    let dir = TempDir::new().unwrap();
    let bad = [
        json!({"command": "analyze", "system": {"preset": "finite_permutation", "table": [0, 0, 1], "values": [1, 2, 3]}}),
        json!({"command": "analyze", "system": {"preset": "nope"}}),
        json!({"command": "probe", "system": {"preset": "rotation"}}),
        json!({"command": "rank", "generators": "1", "tolerances": {"zero": 0.0}}),
        json!({"command": "analyze", "unknown_field": 1}),
    ];
    for (i, cfg) in bad.iter().enumerate() {
        let run = conformal(dir.path(), cfg, &format!("v{i}"), "cache", &[]);
        assert_eq!(run.code, 2, "config {i}: {}", run.stderr);
        let diag: Value = serde_json::from_str(run.stderr.trim()).unwrap();
        assert_eq!(diag["level"], json!("error"));
        assert_eq!(diag["exit_code"], json!(2));
        assert!(run.report.is_none());
    }
    let run = conformal(dir.path(), &json!({"command": "rank", "generators": "1"}), "v9", "cache", &["--k-range", "1:0:1"]);
    assert_eq!(run.code, 2);
}

#[test]
fn budget_and_not_found_exit_3() {
    let dir = TempDir::new().unwrap();
    let mut budget = swap();
    budget["system"]["max_iterations"] = json!(10);
    let run = conformal(dir.path(), &with(budget, json!({"command": "analyze", "n_max": 50})), "b", "cache", &[]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    let diag: Value = serde_json::from_str(run.stderr.trim()).unwrap();
    assert_eq!(diag["kind"], json!("budget"));

    // k = 0.2 lies in the range of every average of h = 0.2
    let run = conformal(dir.path(), &with(constant(), json!({"command": "construct", "k": 0.2})), "n", "cache", &[]);
    assert_eq!(run.code, 3, "{}", run.stderr);
}

#[test]
fn analyze_writes_extrema_curves() {
    let dir = TempDir::new().unwrap();
    let run = conformal(dir.path(), &with(swap(), json!({"command": "analyze"})), "an", "cache", &[]);
    let p = payload(&run);
    assert_eq!(p["coboundary_residual"], json!({"value": "0", "exact": true}));
    assert_eq!(p["limits"]["exact"], json!(true));
    let csv = fs::read_to_string(run.out.join("extrema.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}
