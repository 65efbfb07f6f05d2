use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dp::gradient::exact_gradient;
use crate::dp::tables::ValueTable;
use crate::env::{Environment, TabularEnv, TabularMdp};
use crate::error::Result;
use crate::learner::estimators::{bias_from, mamba_gradient, GradientEstimate};
use crate::policy::PolicyParams;
use crate::rollout::{collect_seeded, rollout_full};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BiasVariance<S> {
    /// `‖mean estimate - exact loss gradient‖`.
    pub bias_norm: S,
    /// Mean squared deviation of the per-trajectory estimates.
    pub variance_trace: S,
    /// Norm of the standard error of the mean estimate.
    pub standard_error: S,
}

/// Samples `num_rollouts` on-policy trajectories, forms the estimator with
/// baseline `fhat`, and compares its mean with the exact gradient of the
/// loss built on `reference` (the baseline `fhat` is meant to estimate).
pub fn estimate_gradient_bias_variance<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &PolicyParams<S>,
    fhat: &ValueTable<S>,
    reference: &ValueTable<S>,
    lambda: S,
    num_rollouts: usize,
    seed: u64,
    workers: usize,
) -> Result<(BiasVariance<S>, GradientEstimate<S>)> {
    let env = TabularEnv::new(Arc::new(mdp.clone()), seed);
    let trajs = collect_seeded(num_rollouts, seed, workers, |_, rng| {
        let mut e = env.fork(rng.next_u64());
        rollout_full(e.as_mut(), policy, rng)
    })?;
    let estimate = mamba_gradient(&trajs, policy, policy, fhat, lambda)?;
    let exact = exact_gradient(mdp, policy, reference, lambda)?;
    let bias_norm = bias_from(&estimate.vector, &exact);
    let n = S::from_usize_lossy(num_rollouts.saturating_sub(1).max(1));
    let stats = BiasVariance {
        bias_norm,
        variance_trace: estimate.variance_trace,
        standard_error: (estimate.variance_trace / n).sqrt(),
    };
    Ok((stats, estimate))
}
