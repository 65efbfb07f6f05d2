//! `mamba make-oracles`: partially trained or handcrafted oracle files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use mamba_core::learner::{train_mamba, Estimator, LearnerConfig};
use mamba_core::policy::{Oracle, Policy};
use mamba_core::rollout::{collect_seeded, derive_seed, rollout_full, workers_from_env};

use crate::config::{build_env, BuiltEnv, EnvSpec, PolicySpec};

const SHUFFLE_STREAM: u64 = 0x5348;
const EVAL_STREAM: u64 = 0x4556;

/// Either a bare environment spec or one with policy and learner settings
/// for the partial-train recipe.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RecipeFile {
    Full {
        env: EnvSpec,
        #[serde(default)]
        policy: Option<PolicySpec>,
        #[serde(default)]
        learner: Value,
    },
    Env(EnvSpec),
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub budgets: Vec<usize>,
    pub handcrafted: Vec<String>,
    pub shuffle: bool,
    pub seed: u64,
    pub eval_rollouts: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub source: String,
    pub eval_return: f64,
}

pub fn evaluate(env: &BuiltEnv, policy: &dyn Policy<f64>, rollouts: usize, seed: u64) -> Result<f64> {
    let base = env.handle(seed);
    let returns = collect_seeded(rollouts, seed, workers_from_env(), |i, rng| {
        let mut e = base.fork(derive_seed(seed, i as u64));
        Ok(rollout_full(e.as_mut(), policy, rng)?.total_return())
    })?;
    Ok(returns.iter().sum::<f64>() / rollouts.max(1) as f64)
}

fn partial_train(
    env: &BuiltEnv,
    policy: Option<&PolicySpec>,
    learner: &Value,
    budget: usize,
    seed: u64,
) -> Result<Oracle<f64>> {
    let mut map = match learner {
        Value::Null => serde_json::Map::new(),
        Value::Object(m) => m.clone(),
        _ => bail!("learner must be an object"),
    };
    map.insert("estimator".into(), "pg-gae".into());
    map.insert("N".into(), budget.into());
    map.insert("seed".into(), seed.into());
    let config: LearnerConfig = serde_json::from_value(Value::Object(map)).context("invalid learner settings")?;
    debug_assert_eq!(config.estimator, Estimator::PgGae);
    let policy_seed = derive_seed(seed, u64::MAX);
    let init = match policy {
        Some(spec) => env.policy(spec, policy_seed)?,
        None => env.default_policy(policy_seed)?,
    };
    let handle = env.handle(seed);
    // runs share the seed, so each budget continues the same training path
    let record = train_mamba(handle.as_ref(), &[], &init, &config, None)?;
    Ok(record.final_policy.into())
}

pub fn cmd_make_oracles(env_path: &Path, options: &OracleOptions) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(env_path).with_context(|| format!("reading {}", env_path.display()))?;
    let recipe: RecipeFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", env_path.display()))?;
    let (spec, policy, learner) = match recipe {
        RecipeFile::Full { env, policy, learner } => (env, policy, learner),
        RecipeFile::Env(env) => (env, None, Value::Null),
    };
    let env = build_env(&spec)?;
    if options.budgets.is_empty() && options.handcrafted.is_empty() {
        bail!("give --budgets or --handcrafted");
    }
    if options.eval_rollouts == 0 {
        bail!("--eval-rollouts must be positive");
    }

    let mut made: Vec<(String, Oracle<f64>, f64)> = Vec::new();
    for &budget in &options.budgets {
        if budget == 0 {
            bail!("budgets must be positive");
        }
        let oracle = partial_train(&env, policy.as_ref(), &learner, budget, options.seed)?;
        let ret = evaluate(&env, &oracle, options.eval_rollouts, derive_seed(options.seed, EVAL_STREAM))?;
        made.push((format!("pg-gae-{budget}"), oracle, ret));
    }
    for name in &options.handcrafted {
        let oracle: Oracle<f64> = env.handcrafted(name)?.into();
        let ret = evaluate(&env, &oracle, options.eval_rollouts, derive_seed(options.seed, EVAL_STREAM))?;
        made.push((name.clone(), oracle, ret));
    }
    // best first, ties keep the given order
    made.sort_by(|a, b| b.2.total_cmp(&a.2));
    if options.shuffle {
        made.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(options.seed, SHUFFLE_STREAM)));
    }

    fs::create_dir_all(&options.out_dir).with_context(|| format!("creating {}", options.out_dir.display()))?;
    let mut manifest = Vec::new();
    for (i, (source, oracle, ret)) in made.into_iter().enumerate() {
        let file = format!("oracle-{i}.json");
        fs::write(options.out_dir.join(&file), serde_json::to_string(&oracle)?)?;
        manifest.push(ManifestEntry {
            file,
            source,
            eval_return: ret,
        });
    }
    fs::write(options.out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
