use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mamba_cli::run::read_metrics;

fn mamba(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mamba"))
        .args(args)
        .current_dir(dir)
        .env("MAMBA_WORKERS", "1")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const GRID: &str = r#"{"kind": "gridworld", "width": 4, "height": 4, "horizon": 8}"#;

#[test]
fn aggrevated_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"env": {GRID}, "oracles": [{{"handcrafted": "gridworld-left"}}],
            "learner": {{"lambda": 0, "K": 1, "H": 4, "N": 6, "optimizer": {{"kind": "adam", "lr": 0.1}}}},
            "eval_rollouts": 4, "seed": 3, "out_dir": "OUT"}}"#
    );
    for out in ["a", "b"] {
        write_config(tmp.path(), &format!("{out}.json"), &body.replace("OUT", out));
        let o = mamba(&["run", &format!("{out}.json")], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(tmp.path().join("a/metrics.jsonl")).unwrap();
    let b = fs::read(tmp.path().join("b/metrics.jsonl")).unwrap();
    assert_eq!(a, b);
    let lines = read_metrics(&tmp.path().join("a/metrics.jsonl")).unwrap();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.seed == 3 && l.config_hash == lines[0].config_hash));
    assert!(lines.windows(2).all(|w| w[0].row.iter < w[1].row.iter));
    assert!(lines.iter().all(|l| l.row.delta_check.is_some()));
    let csv = fs::read_to_string(tmp.path().join("a/metrics.csv")).unwrap();
    assert!(csv.starts_with("iter,mean_eval_return,best_return"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn lambda_sweep_makes_one_directory_per_value_and_exports() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"env": {GRID}, "oracles": [{{"handcrafted": "gridworld-left"}}, {{"handcrafted": "gridworld-right"}}],
            "learner": {{"lambda": [0, 0.1, 0.5, 0.9], "K": 2, "H": 4, "N": 3}},
            "eval_rollouts": 2, "seed": [0, 1], "out_dir": "sweep"}}"#
    );
    write_config(tmp.path(), "sweep.json", &body);
    let o = mamba(&["run", "sweep.json"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut dirs: Vec<String> = fs::read_dir(tmp.path().join("sweep"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    dirs.sort();
    assert_eq!(dirs, ["lambda-0", "lambda-0.1", "lambda-0.5", "lambda-0.9"]);

    let o = mamba(&["export", "sweep/lambda-0.5", "-o", "curve.csv"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,median_best_return,p25,p75"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn export_rejects_mismatched_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, n) in [("short", 2), ("long", 3)] {
        let body = format!(
            r#"{{"env": {GRID}, "oracles": [{{"handcrafted": "gridworld-left"}}],
                "learner": {{"H": 2, "N": {n}}}, "eval_rollouts": 1, "seed": 0, "out_dir": "{name}"}}"#
        );
        write_config(tmp.path(), &format!("{name}.json"), &body);
        assert!(mamba(&["run", &format!("{name}.json")], tmp.path()).status.success());
    }
    let o = mamba(&["export", "short", "long", "-o", "x.csv"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_configs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "bad.json",
        &format!(r#"{{"env": {GRID}, "learner": {{"lambda": 1.5}}, "seed": 0, "out_dir": "o"}}"#),
    );
    write_config(
        tmp.path(),
        "missing.json",
        &format!(r#"{{"env": {GRID}, "oracles": ["nowhere.json"], "seed": 0, "out_dir": "o"}}"#),
    );
    write_config(tmp.path(), "noseed.json", &format!(r#"{{"env": {GRID}, "out_dir": "o"}}"#));
    for name in ["bad.json", "missing.json", "noseed.json", "absent.json"] {
        let o = mamba(&["run", name], tmp.path());
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn verify_trees_passes_and_unknown_suite_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mamba(&["verify", "trees", "--seed", "0"], tmp.path());
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(!table.contains("FAIL"));
    assert!(table.contains("f^max left child 0.7") && table.contains("f^max right child 0.75"), "{table}");
    assert_eq!(mamba(&["verify", "everything"], tmp.path()).status.code(), Some(2));
}

#[test]
fn oracle_files_feed_back_into_runs() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "env.json",
        &format!(r#"{{"env": {GRID}, "learner": {{"H": 4, "optimizer": {{"kind": "adam", "lr": 0.1}}}}}}"#),
    );
    let o = mamba(&["make-oracles", "env.json", "--budgets", "1,5,20", "--out", "orc"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("orc/manifest.json")).unwrap()).unwrap();
    let returns: Vec<f64> = manifest.iter().map(|m| m["eval_return"].as_f64().unwrap()).collect();
    assert_eq!(returns.len(), 3);
    assert!(returns.windows(2).all(|w| w[0] >= w[1]));

    let shuffled = |out: &str| {
        let o = mamba(
            &["make-oracles", "env.json", "--budgets", "1,5,20", "--shuffle", "--seed", "7", "--out", out],
            tmp.path(),
        );
        assert!(o.status.success());
        fs::read_to_string(tmp.path().join(out).join("manifest.json")).unwrap()
    };
    assert_eq!(shuffled("s1"), shuffled("s2"));

    let o = mamba(
        &["make-oracles", "env.json", "--handcrafted", "gridworld-left,gridworld-right", "--out", "hand"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body = format!(
        r#"{{"env": {GRID}, "oracles": ["orc/oracle-0.json", "hand/oracle-0.json"],
            "learner": {{"K": 2, "H": 4, "N": 2}}, "eval_rollouts": 2, "seed": 0, "out_dir": "mixed"}}"#
    );
    write_config(tmp.path(), "mixed.json", &body);
    let o = mamba(&["run", "mixed.json"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
