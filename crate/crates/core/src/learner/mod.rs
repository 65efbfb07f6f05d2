//! Sampled gradient estimators, their bias/variance diagnostics and the
//! training loop.

pub mod config;
pub mod diagnostics;
pub mod estimators;
pub mod train;

pub use config::{BehaviorCloneConfig, Estimator, LearnerConfig, SwitchKind, ValueModelConfig};
pub use diagnostics::{estimate_gradient_bias_variance, BiasVariance};
pub use estimators::{
    aggrevate_gradient, lambda_advantages_on_trajectory, mamba_gradient, pg_gae_gradient, td_residuals, Baseline,
    GradientEstimate, MaxBaseline,
};
pub use train::{rows_from_jsonl, rows_to_jsonl, train_mamba, ExactContext, IterationRow, RunRecord};
