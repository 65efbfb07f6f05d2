use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::optim::OptimizerConfig;
use crate::value::{RegressionConfig, ValueKind, DEFAULT_VALUE_HIDDEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Mamba,
    PgGae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchKind {
    Uniform,
    /// Geometric with mean equal to the average learner episode length so
    /// far.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueModelConfig {
    /// `None` picks tabular averages for index observations and an MLP
    /// otherwise.
    pub kind: Option<ValueKind>,
    pub hidden: Vec<usize>,
}

impl Default for ValueModelConfig {
    fn default() -> Self {
        Self {
            kind: None,
            hidden: DEFAULT_VALUE_HIDDEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorCloneConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub lambda: f64,
    /// Number of oracles used, taken from the front of the oracle list.
    #[serde(rename = "K")]
    pub num_oracles: usize,
    /// Rollouts per iteration, split evenly between gradient and value data.
    #[serde(rename = "H")]
    pub rollouts_per_iter: usize,
    #[serde(rename = "N")]
    pub iterations: usize,
    pub estimator: Estimator,
    pub optimizer: OptimizerConfig,
    /// Iterations of RIRO data kept per oracle value buffer.
    pub buffer_window: usize,
    pub value_fit: RegressionConfig,
    pub switch_sampler: SwitchKind,
    pub value_model: ValueModelConfig,
    /// Full oracle rollouts per oracle before the first iteration.
    pub pretrain_rollouts: usize,
    pub behavior_clone: Option<BehaviorCloneConfig>,
    pub eval_rollouts: usize,
    pub seed: u64,
    /// Rollout threads; results do not depend on it.
    #[serde(skip, default = "crate::rollout::workers_from_env")]
    pub workers: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            num_oracles: 1,
            rollouts_per_iter: 8,
            iterations: 100,
            estimator: Estimator::Mamba,
            optimizer: OptimizerConfig::adam(),
            buffer_window: 100,
            value_fit: RegressionConfig::default(),
            switch_sampler: SwitchKind::Geometric,
            value_model: ValueModelConfig::default(),
            pretrain_rollouts: 16,
            behavior_clone: None,
            eval_rollouts: 8,
            seed: 0,
            workers: 1,
        }
    }
}

/// Value-function window used by the policy-gradient baseline.
pub const PG_GAE_BUFFER_WINDOW: usize = 2;

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return invalid(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.rollouts_per_iter < 2 {
            return invalid("H must be at least 2");
        }
        if self.num_oracles == 0 && self.estimator == Estimator::Mamba {
            return invalid("K must be at least 1");
        }
        if self.buffer_window == 0 {
            return invalid("buffer window must be positive");
        }
        if self.eval_rollouts == 0 {
            return invalid("need at least one evaluation rollout");
        }
        if !(self.optimizer.lr > 0.0) || !(self.value_fit.lr > 0.0) {
            return invalid("learning rates must be positive");
        }
        Ok(())
    }

    pub fn gradient_rollouts(&self) -> usize {
        self.rollouts_per_iter / 2
    }

    pub fn value_rollouts(&self) -> usize {
        self.rollouts_per_iter - self.gradient_rollouts()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_short_keys() {
        let cfg: LearnerConfig =
            serde_json::from_str(r#"{"lambda": 0.5, "K": 2, "H": 4, "N": 3, "estimator": "pg-gae"}"#).unwrap();
        assert_eq!((cfg.num_oracles, cfg.rollouts_per_iter, cfg.iterations), (2, 4, 3));
        assert_eq!(cfg.estimator, Estimator::PgGae);
        assert_eq!(cfg.value_fit, RegressionConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            LearnerConfig { lambda: 1.5, ..Default::default() },
            LearnerConfig { rollouts_per_iter: 1, ..Default::default() },
            LearnerConfig { num_oracles: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
        assert!(serde_json::from_str::<LearnerConfig>(r#"{"lamda": 0.5}"#).is_err());
    }
}
