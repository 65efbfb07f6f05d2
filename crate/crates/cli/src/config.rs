//! Experiment configuration files and what they resolve to.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use mamba_core::dp::TabularPolicy;
use mamba_core::env::{
    make_gridworld, make_ordering_tree, make_random_mdp, make_switching_tree, CartPole, Environment, OrderingVariant,
    TabularEnv, TabularMdp,
};
use mamba_core::learner::LearnerConfig;
use mamba_core::policy::{FeatureMap, Oracle, PolicyParams};
use mamba_core::rollout::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    Gridworld {
        width: usize,
        height: usize,
        horizon: usize,
    },
    Random {
        seed: u64,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
    },
    SwitchingTree,
    OrderingTree {
        variant: OrderingVariant,
    },
    Cartpole {
        #[serde(default)]
        seed: u64,
    },
    /// A tabular MDP stored as JSON.
    File {
        path: PathBuf,
    },
}

/// Oracle given either as a JSON file or by the name of a built-in one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleSpec {
    Path(PathBuf),
    Handcrafted { handcrafted: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Features {
    OneHotState,
    OneHotTimeState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    TabularSoftmax,
    LinearSoftmax {
        #[serde(default = "default_features")]
        features: Features,
    },
    GaussianMlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_log_std")]
        init_log_std: f64,
    },
}

fn default_features() -> Features {
    Features::OneHotState
}

fn default_hidden() -> Vec<usize> {
    vec![128, 128]
}

fn default_log_std() -> f64 {
    -0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    One(u64),
    Many(Vec<u64>),
}

impl Seeds {
    pub fn list(&self) -> Vec<u64> {
        match self {
            Self::One(s) => vec![*s],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub oracles: Vec<OracleSpec>,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    /// Learner settings; a list under `lambda` makes this a sweep.
    #[serde(default)]
    pub learner: Value,
    #[serde(default)]
    pub eval_rollouts: Option<usize>,
    pub seed: Seeds,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub exact_diagnostics: Option<bool>,
}

/// A single (λ, seed) run with everything resolved.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub dir: PathBuf,
    pub seed: u64,
    pub learner: LearnerConfig,
    pub canonical: Value,
}

impl ExperimentConfig {
    /// Reads a config and makes relative paths relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        config.check()?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let EnvSpec::File { path } = &mut self.env {
            fix(path);
        }
        for o in &mut self.oracles {
            if let OracleSpec::Path(p) = o {
                fix(p);
            }
        }
        fix(&mut self.out_dir);
    }

    fn check(&self) -> Result<()> {
        if let EnvSpec::File { path } = &self.env {
            if !path.is_file() {
                bail!("environment file {} does not exist", path.display());
            }
        }
        for o in &self.oracles {
            if let OracleSpec::Path(p) = o {
                if !p.is_file() {
                    bail!("oracle file {} does not exist", p.display());
                }
            }
        }
        if self.seed.list().is_empty() {
            bail!("seed list is empty");
        }
        if !self.learner.is_null() && !self.learner.is_object() {
            bail!("learner must be an object");
        }
        Ok(())
    }

    /// Expands the λ sweep and the seed list into individual runs.
    pub fn runs(&self) -> Result<Vec<RunSpec>> {
        let mut learner = match &self.learner {
            Value::Null => serde_json::Map::new(),
            Value::Object(m) => m.clone(),
            _ => bail!("learner must be an object"),
        };
        let lambdas: Vec<Option<Value>> = match learner.remove("lambda") {
            Some(Value::Array(list)) => {
                if list.is_empty() {
                    bail!("lambda sweep is empty");
                }
                list.into_iter().map(Some).collect()
            }
            Some(v) => vec![Some(v)],
            None => vec![None],
        };
        let sweep = lambdas.len() > 1;
        let seeds = self.seed.list();
        let mut out = Vec::new();
        for lambda in &lambdas {
            let mut map = learner.clone();
            if let Some(l) = lambda {
                map.insert("lambda".into(), l.clone());
            }
            if let Some(e) = self.eval_rollouts {
                map.insert("eval_rollouts".into(), e.into());
            }
            for &seed in &seeds {
                map.insert("seed".into(), seed.into());
                let parsed: LearnerConfig =
                    serde_json::from_value(Value::Object(map.clone())).context("invalid learner settings")?;
                parsed.validate()?;
                let mut dir = self.out_dir.clone();
                if sweep {
                    dir.push(format!("lambda-{}", parsed.lambda));
                }
                if seeds.len() > 1 {
                    dir.push(format!("seed-{seed}"));
                }
                let canonical = serde_json::json!({
                    "env": self.env,
                    "oracles": self.oracles,
                    "policy": self.policy,
                    "learner": parsed,
                    "exact_diagnostics": self.exact_diagnostics,
                });
                out.push(RunSpec {
                    dir,
                    seed,
                    learner: parsed,
                    canonical,
                });
            }
        }
        Ok(out)
    }
}

/// SHA-256 of the compact JSON form. Object keys serialize sorted, so
/// equal configs hash equally.
pub fn config_hash(canonical: &Value) -> String {
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

pub enum BuiltEnv {
    Tabular {
        mdp: TabularMdp<f64>,
        /// Named built-in oracles of the environment.
        builtin: Vec<(String, TabularPolicy<f64>)>,
    },
    CartPole {
        seed: u64,
    },
}

impl BuiltEnv {
    pub fn handle(&self, seed: u64) -> Box<dyn Environment<f64>> {
        match self {
            Self::Tabular { mdp, .. } => Box::new(TabularEnv::new(Arc::new(mdp.clone()), seed)),
            Self::CartPole { seed: base } => Box::new(CartPole::<f64>::with_seed(derive_seed(*base, seed))),
        }
    }

    pub fn mdp(&self) -> Option<&TabularMdp<f64>> {
        match self {
            Self::Tabular { mdp, .. } => Some(mdp),
            Self::CartPole { .. } => None,
        }
    }

    pub fn handcrafted(&self, name: &str) -> Result<TabularPolicy<f64>> {
        let known = match self {
            Self::Tabular { builtin, .. } => builtin.as_slice(),
            Self::CartPole { .. } => &[],
        };
        match known.iter().find(|(n, _)| n == name) {
            Some((_, p)) => Ok(p.clone()),
            None => {
                let names: Vec<&str> = known.iter().map(|(n, _)| n.as_str()).collect();
                bail!("no handcrafted oracle {name:?} for this environment (available: {names:?})")
            }
        }
    }

    pub fn default_policy(&self, seed: u64) -> Result<PolicyParams<f64>> {
        let spec = match self {
            Self::Tabular { .. } => PolicySpec::LinearSoftmax {
                features: Features::OneHotState,
            },
            Self::CartPole { .. } => PolicySpec::GaussianMlp {
                hidden: default_hidden(),
                init_log_std: default_log_std(),
            },
        };
        self.policy(&spec, seed)
    }

    pub fn policy(&self, spec: &PolicySpec, seed: u64) -> Result<PolicyParams<f64>> {
        Ok(match (spec, self) {
            (PolicySpec::TabularSoftmax, Self::Tabular { mdp, .. }) => {
                PolicyParams::tabular_softmax(mdp.horizon(), mdp.num_base_states(), mdp.num_actions())
            }
            (PolicySpec::LinearSoftmax { features }, Self::Tabular { mdp, .. }) => {
                let num_states = mdp.num_base_states();
                let map = match features {
                    Features::OneHotState => FeatureMap::OneHotState { num_states },
                    Features::OneHotTimeState => FeatureMap::OneHotTimeState {
                        horizon: mdp.horizon(),
                        num_states,
                    },
                };
                PolicyParams::linear_softmax(map, mdp.num_actions())
            }
            (PolicySpec::GaussianMlp { hidden, init_log_std }, Self::CartPole { .. }) => {
                PolicyParams::gaussian_mlp(4, hidden, 1, *init_log_std, seed)?
            }
            (spec, _) => bail!("policy {spec:?} does not fit this environment"),
        })
    }
}

pub fn build_env(spec: &EnvSpec) -> Result<BuiltEnv> {
    let lr = |tree: mamba_core::env::TreeInstance<f64>| BuiltEnv::Tabular {
        builtin: vec![("tree-left".into(), tree.left.clone()), ("tree-right".into(), tree.right.clone())],
        mdp: tree.mdp,
    };
    Ok(match spec {
        EnvSpec::Gridworld { width, height, horizon } => {
            let gw = make_gridworld::<f64>(*width, *height, *horizon)?;
            BuiltEnv::Tabular {
                builtin: vec![
                    ("gridworld-left".into(), gw.left_oracle().clone()),
                    ("gridworld-right".into(), gw.right_oracle().clone()),
                ],
                mdp: gw.mdp,
            }
        }
        EnvSpec::Random {
            seed,
            num_states,
            num_actions,
            horizon,
        } => BuiltEnv::Tabular {
            mdp: make_random_mdp(*seed, *num_states, *num_actions, *horizon)?,
            builtin: Vec::new(),
        },
        EnvSpec::SwitchingTree => lr(make_switching_tree()?),
        EnvSpec::OrderingTree { variant } => lr(make_ordering_tree(*variant)?),
        EnvSpec::Cartpole { seed } => BuiltEnv::CartPole { seed: *seed },
        EnvSpec::File { path } => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            BuiltEnv::Tabular {
                mdp: TabularMdp::from_json(&text)?,
                builtin: Vec::new(),
            }
        }
    })
}

/// Reads an oracle file: a tagged oracle, a bare tabular policy or a bare
/// parameterized policy.
pub fn read_oracle(path: &Path) -> Result<Oracle<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(o) = serde_json::from_str::<Oracle<f64>>(&text) {
        return Ok(o);
    }
    if let Ok(p) = serde_json::from_str::<TabularPolicy<f64>>(&text) {
        return Ok(p.into());
    }
    match PolicyParams::from_json(&text) {
        Ok(p) => Ok(p.into()),
        Err(e) => bail!("{} is not an oracle file: {e}", path.display()),
    }
}

pub fn resolve_oracles(env: &BuiltEnv, specs: &[OracleSpec]) -> Result<Vec<Oracle<f64>>> {
    specs
        .iter()
        .map(|s| match s {
            OracleSpec::Path(p) => read_oracle(p),
            OracleSpec::Handcrafted { handcrafted } => Ok(env.handcrafted(handcrafted)?.into()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn lambda_list_expands_into_runs() {
        let c = parse(
            r#"{"env": {"kind": "gridworld", "width": 3, "height": 3, "horizon": 6},
                "learner": {"lambda": [0, 0.1, 0.5, 0.9], "K": 1}, "seed": [1, 2], "out_dir": "o"}"#,
        );
        let runs = c.runs().unwrap();
        assert_eq!(runs.len(), 8);
        assert_eq!(runs[2].dir, PathBuf::from("o/lambda-0.1/seed-1"));
        assert_eq!(runs[2].learner.lambda, 0.1);
        assert_eq!(runs[3].seed, 2);
    }

    #[test]
    fn single_run_writes_to_out_dir() {
        let c = parse(r#"{"env": {"kind": "switching-tree"}, "seed": 4, "out_dir": "o", "eval_rollouts": 3}"#);
        let runs = c.runs().unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].dir, PathBuf::from("o"));
        assert_eq!(runs[0].learner.seed, 4);
        assert_eq!(runs[0].learner.eval_rollouts, 3);
    }

    #[test]
    fn missing_seed_is_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"env": {"kind": "switching-tree"}, "out_dir": "o"}"#).is_err());
    }

    #[test]
    fn unknown_learner_key_is_rejected() {
        let c = parse(r#"{"env": {"kind": "switching-tree"}, "learner": {"gamma": 1}, "seed": 0, "out_dir": "o"}"#);
        assert!(c.runs().is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a": 1, "b": [1, 2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b": [1, 2], "a": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&serde_json::json!({"a": 2, "b": [1, 2]})));
    }

    #[test]
    fn handcrafted_names_follow_the_environment() {
        let gw = build_env(&EnvSpec::Gridworld {
            width: 3,
            height: 3,
            horizon: 6,
        })
        .unwrap();
        assert!(gw.handcrafted("gridworld-left").is_ok());
        assert!(gw.handcrafted("tree-left").is_err());
    }
}
