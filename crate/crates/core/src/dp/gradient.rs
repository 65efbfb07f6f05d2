//! Exact gradients of the λ-weighted online loss for softmax policies.
//!
//! Every vector here is an ascent direction: the gradient of `-ℓ`, or of
//! `V^π(d_0)` for the policy gradient.

use crate::dp::lambda::lambda_advantage_exact;
use crate::dp::loss::online_loss_exact;
use crate::dp::tables::{TabularPolicy, ValueTable};
use crate::dp::values::{policy_q_values, state_distributions};
use crate::env::{Action, Observation, TabularMdp};
use crate::error::{invalid, Result};
use crate::policy::PolicyParams;
use crate::scalar::{axpy, Scalar};

fn exact_table<S: Scalar>(mdp: &TabularMdp<S>, policy: &PolicyParams<S>) -> Result<TabularPolicy<S>> {
    let table = policy.tabulate(mdp.horizon(), mdp.num_base_states())?;
    table.check_shape(mdp)?;
    Ok(table)
}

/// `Σ_t Σ_s d_t(s) Σ_a π(a|t,s) w(t,s,a) ∇log π(a|t,s)` under the policy's
/// own state distribution.
fn weighted_score_sum<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &PolicyParams<S>,
    table: &TabularPolicy<S>,
    weight: impl Fn(usize, usize, usize) -> S,
) -> Result<Vec<S>> {
    let dist = state_distributions(mdp, table)?;
    let mut grad = vec![S::zero(); policy.num_params()];
    for (t, d) in dist.per_time.iter().enumerate() {
        for (s, &ds) in d.iter().enumerate() {
            if ds == S::zero() {
                continue;
            }
            let obs = Observation::tabular(t, s);
            for a in 0..mdp.num_actions() {
                let coef = ds * table.prob(t, s, a) * weight(t, s, a);
                if coef != S::zero() {
                    axpy(coef, &policy.logprob_gradient(&obs, &Action::Discrete(a))?, &mut grad);
                }
            }
        }
    }
    Ok(grad)
}

/// Gradient of `-ℓ(π; λ)` at the current policy with the roll-in frozen at
/// the same policy: `Σ_t E_{d_t^π} E_π[∇log π · A_λ^{f,π}]`.
pub fn exact_gradient<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &PolicyParams<S>,
    f: &ValueTable<S>,
    lambda: S,
) -> Result<Vec<S>> {
    let table = exact_table(mdp, policy)?;
    let adv = lambda_advantage_exact(mdp, &table, f, lambda)?;
    weighted_score_sum(mdp, policy, &table, |t, s, a| adv.get(t, s, a))
}

/// Likelihood-ratio gradient of `V^π(d_0)` computed from `Q^π`.
pub fn exact_policy_gradient<S: Scalar>(mdp: &TabularMdp<S>, policy: &PolicyParams<S>) -> Result<Vec<S>> {
    let table = exact_table(mdp, policy)?;
    let q = policy_q_values(mdp, &table)?;
    weighted_score_sum(mdp, policy, &table, |t, s, a| q[t][s][a])
}

/// Central finite differences of `-ℓ(π; λ)` with the roll-in frozen at the
/// given policy.
pub fn loss_finite_difference<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &PolicyParams<S>,
    f: &ValueTable<S>,
    lambda: S,
    step: S,
) -> Result<Vec<S>> {
    if !(step > S::zero()) {
        return invalid("finite-difference step must be positive");
    }
    let rollin = exact_table(mdp, policy)?;
    let base = policy.params();
    let two = S::lit(2.0);
    let mut grad = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + step;
        let up = online_loss_exact(mdp, &rollin, &exact_table(mdp, &policy.with_params(&p)?)?, f, lambda)?;
        p[k] = base[k] - step;
        let down = online_loss_exact(mdp, &rollin, &exact_table(mdp, &policy.with_params(&p)?)?, f, lambda)?;
        grad.push(-(up - down) / (two * step));
    }
    Ok(grad)
}

/// `max_k |a_k - b_k| / max(|a_k|, |b_k|, floor)`.
pub fn max_relative_error<S: Scalar>(a: &[S], b: &[S], floor: S) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(S::zero(), S::max)
}
