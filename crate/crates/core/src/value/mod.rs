//! Oracle value approximators, Monte-Carlo regression and the f̂^max
//! evaluator.

pub mod buffer;
pub mod model;

pub use buffer::{ReplayBuffer, WeightedReturnSample};
pub use model::{monte_carlo_regression, RegressionConfig, ValueKind, ValueModel, DEFAULT_VALUE_HIDDEN};

use crate::env::Observation;
use crate::error::{invalid, Result};
use crate::rollout::Trajectory;
use crate::scalar::Scalar;

/// Return-to-go targets for every step at or after `from_time`.
pub fn mc_targets<S: Scalar>(trajectory: &Trajectory<S>, from_time: usize, weight: S) -> Vec<WeightedReturnSample<S>> {
    let mut out = Vec::new();
    let mut to_go = S::zero();
    for step in trajectory.steps.iter().rev() {
        if step.t < from_time {
            break;
        }
        to_go += step.reward;
        out.push(WeightedReturnSample {
            obs: step.obs.clone(),
            target: to_go,
            weight,
        });
    }
    out.reverse();
    out
}

/// `max_k V̂^k(obs)`, zero at the horizon.
pub fn fhat_max<S: Scalar>(models: &[ValueModel<S>], obs: &Observation<S>) -> Result<S> {
    let Some(first) = models.first() else {
        return invalid("f̂^max needs at least one value model");
    };
    let mut best = first.predict(obs)?;
    for m in &models[1..] {
        best = best.max(m.predict(obs)?);
    }
    Ok(best)
}
