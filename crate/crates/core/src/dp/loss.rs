use serde::{Deserialize, Serialize};

use crate::dp::lambda::lambda_advantage_exact;
use crate::dp::policies::max_aggregation_policy;
use crate::dp::tables::{TabularPolicy, ValueTable};
use crate::dp::values::{policy_return, state_distributions, sum_over_visits};
use crate::env::TabularMdp;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// λ-weighted online loss of `eval_policy` under the roll-in distribution of
/// `rollin_policy`:
/// `-(1-λ) T E_{d^μ}[A_λ(s, π)] - λ E_{d_0}[A_λ(s, π)]`,
/// where `A_λ` continues with `eval_policy` as well.
pub fn online_loss_exact<S: Scalar>(
    mdp: &TabularMdp<S>,
    rollin_policy: &TabularPolicy<S>,
    eval_policy: &TabularPolicy<S>,
    f: &ValueTable<S>,
    lambda: S,
) -> Result<S> {
    let rollin = state_distributions(mdp, rollin_policy)?;
    let adv = lambda_advantage_exact(mdp, eval_policy, f, lambda)?;
    let visited = sum_over_visits(&rollin, |t, s| adv.under_policy(t, s, eval_policy));
    let initial: S = mdp
        .init_dist()
        .iter()
        .enumerate()
        .map(|(s, &d)| d * adv.under_policy(0, s, eval_policy))
        .sum();
    Ok(-(S::one() - lambda) * visited - lambda * initial)
}

/// Measurable quantities of the online-learning reduction over a policy
/// sequence `π_1..π_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ReductionDiagnostics<S> {
    /// `-(1/N) Σ ℓ_n(π^max)`.
    pub delta_n: S,
    /// `min_{π ∈ C} (1/N)(Σ ℓ_n(π) - Σ ℓ_n(π^max))` over the comparator set.
    pub epsilon_hat_n: S,
    /// `Σ ℓ_n(π_n) - min_{π ∈ C} Σ ℓ_n(π)`.
    pub regret_n: S,
    /// `(1/N) Σ V^{π_n}(d_0)`.
    pub avg_value: S,
    /// `f(d_0)`.
    pub baseline_init: S,
    /// `|avg_value - (f(d_0) + Δ_N - ε̂_N - regret_N / N)|`.
    pub identity_residual: S,
    /// Per-round `-ℓ_n(π^max; λ)`.
    pub per_round_improvement: Vec<S>,
}

/// Computes `Δ_N`, `ε̂_N`, the regret and the average value exactly.
///
/// `π^max` (built from `f`) is always added to the comparator set, so
/// `ε̂_N <= 0`; it equals zero at `λ = 0` where `π^max` minimizes every round.
pub fn reduction_diagnostics<S: Scalar>(
    mdp: &TabularMdp<S>,
    policies: &[TabularPolicy<S>],
    f: &ValueTable<S>,
    lambda: S,
    comparators: &[TabularPolicy<S>],
) -> Result<ReductionDiagnostics<S>> {
    if comparators.is_empty() {
        return invalid("comparator set must not be empty");
    }
    if policies.is_empty() {
        return invalid("policy sequence must not be empty");
    }
    let pi_max = max_aggregation_policy(mdp, f)?;
    let n = S::from_usize_lossy(policies.len());

    let mut pool: Vec<&TabularPolicy<S>> = comparators.iter().collect();
    pool.push(&pi_max);
    let mut cumulative = vec![S::zero(); pool.len()];
    let mut learner_total = S::zero();
    let mut value_total = S::zero();
    let mut per_round_improvement = Vec::with_capacity(policies.len());
    for pi_n in policies {
        for (acc, cand) in cumulative.iter_mut().zip(&pool) {
            *acc += online_loss_exact(mdp, pi_n, cand, f, lambda)?;
        }
        learner_total += online_loss_exact(mdp, pi_n, pi_n, f, lambda)?;
        value_total += policy_return(mdp, pi_n)?;
        per_round_improvement.push(-online_loss_exact(mdp, pi_n, &pi_max, f, lambda)?);
    }
    let max_total = *cumulative.last().expect("pool holds pi_max");
    let best_total = cumulative.iter().copied().fold(S::infinity(), S::min);
    let delta_n = -max_total / n;
    let epsilon_hat_n = (best_total - max_total) / n;
    let regret_n = learner_total - best_total;
    let avg_value = value_total / n;
    let baseline_init = f.at_init(mdp.init_dist());
    let identity_residual = (avg_value - (baseline_init + delta_n - epsilon_hat_n - regret_n / n)).abs();
    Ok(ReductionDiagnostics {
        delta_n,
        epsilon_hat_n,
        regret_n,
        avg_value,
        baseline_init,
        identity_residual,
        per_round_improvement,
    })
}
