//! `mamba run`: training runs and their metric files.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use mamba_core::learner::{train_mamba, ExactContext, IterationRow, RunRecord};
use mamba_core::policy::Oracle;
use mamba_core::rollout::derive_seed;

use crate::config::{build_env, config_hash, resolve_oracles, ExperimentConfig, RunSpec};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CSV_FILE: &str = "metrics.csv";

/// One metrics line: an iteration row tagged with its run's identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLine {
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten)]
    pub row: IterationRow,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsLine>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

pub fn cmd_run(config_path: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let env = build_env(&config.env)?;
    let oracles = resolve_oracles(&env, &config.oracles)?;
    for run in config.runs()? {
        execute(&config, &env, &oracles, &run)?;
    }
    Ok(())
}

fn execute(
    config: &ExperimentConfig,
    env: &crate::config::BuiltEnv,
    oracles: &[Oracle<f64>],
    run: &RunSpec,
) -> Result<()> {
    let hash = config_hash(&run.canonical);
    let metrics_path = run.dir.join(METRICS_FILE);
    if let Ok(old) = read_metrics(&metrics_path) {
        if old.first().is_some_and(|l| l.config_hash != hash) {
            eprintln!("warning: config changed since the last run in {}", run.dir.display());
        }
    }
    let policy_seed = derive_seed(run.seed, u64::MAX);
    let init = match &config.policy {
        Some(spec) => env.policy(spec, policy_seed)?,
        None => env.default_policy(policy_seed)?,
    };
    let tables: Option<Vec<_>> = oracles.iter().map(|o| o.table().cloned()).collect();
    let exact = match (env.mdp(), tables, config.exact_diagnostics) {
        (_, _, Some(false)) => None,
        (Some(mdp), Some(tables), _) => Some(ExactContext {
            mdp: mdp.clone(),
            oracles: tables,
            inject_values: false,
        }),
        _ => None,
    };
    let handle = env.handle(run.seed);
    let record = train_mamba(handle.as_ref(), oracles, &init, &run.learner, exact.as_ref())
        .with_context(|| format!("training run in {}", run.dir.display()))?;
    write_run(run, &hash, &record)?;
    eprintln!(
        "{}: {} iterations, best return {}",
        run.dir.display(),
        record.rows.len(),
        record.final_best_return()
    );
    Ok(())
}

fn write_run(run: &RunSpec, hash: &str, record: &RunRecord<f64>) -> Result<()> {
    fs::create_dir_all(&run.dir).with_context(|| format!("creating {}", run.dir.display()))?;
    let mut jsonl = String::new();
    for row in &record.rows {
        let line = MetricsLine {
            config_hash: hash.to_string(),
            seed: run.seed,
            row: row.clone(),
        };
        jsonl.push_str(&serde_json::to_string(&line)?);
        jsonl.push('\n');
    }
    fs::write(run.dir.join(METRICS_FILE), jsonl)?;

    let mut csv = csv::Writer::from_path(run.dir.join(CSV_FILE))?;
    csv.write_record([
        "iter",
        "mean_eval_return",
        "best_return",
        "grad_norm",
        "bias_norm",
        "variance_trace",
        "delta_check",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &record.rows {
        csv.write_record([
            r.iter.to_string(),
            r.mean_eval_return.to_string(),
            r.best_return.to_string(),
            r.grad_norm.to_string(),
            opt(r.bias_norm),
            opt(r.variance_trace),
            opt(r.delta_check),
        ])?;
    }
    csv.flush()?;

    let mut resolved = run.canonical.clone();
    resolved["seed"] = run.seed.into();
    resolved["config_hash"] = hash.into();
    fs::write(run.dir.join("config.json"), serde_json::to_string_pretty(&resolved)?)?;
    fs::write(run.dir.join("best_policy.json"), record.best_policy.to_json()?)?;
    Ok(())
}
