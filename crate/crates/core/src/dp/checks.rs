//! Executable residuals of the performance-difference identities.

use crate::dp::lambda::{check_lambda, i_step_advantage, lambda_advantage_exact};
use crate::dp::tables::{AdvantageTable, TabularPolicy, ValueTable};
use crate::dp::values::{advantage_wrt_f, policy_return, state_distributions, sum_over_visits};
use crate::env::TabularMdp;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// `|V^π(d_0) - f(d_0) - T E_{d^π}[A^f(s, π)]|`.
pub fn check_pdl<S: Scalar>(mdp: &TabularMdp<S>, policy: &TabularPolicy<S>, f: &ValueTable<S>) -> Result<S> {
    let dist = state_distributions(mdp, policy)?;
    let adv = advantage_wrt_f(mdp, f)?;
    let rhs = sum_over_visits(&dist, |t, s| adv.under_policy(t, s, policy));
    let lhs = policy_return(mdp, policy)? - f.at_init(mdp.init_dist());
    Ok((lhs - rhs).abs())
}

/// Residual of the λ-weighted identity
/// `V^π(d_0) - f(d_0) = (1-λ) T E_{d^π}[A_λ(s,π)] + λ E_{d_0}[A_λ(s,π)]`.
pub fn check_lambda_pdl<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
    f: &ValueTable<S>,
    lambda: S,
) -> Result<S> {
    let dist = state_distributions(mdp, policy)?;
    let adv = lambda_advantage_exact(mdp, policy, f, lambda)?;
    let visited = sum_over_visits(&dist, |t, s| adv.under_policy(t, s, policy));
    let initial: S = mdp
        .init_dist()
        .iter()
        .enumerate()
        .map(|(s, &d)| d * adv.under_policy(0, s, policy))
        .sum();
    let rhs = (S::one() - lambda) * visited + lambda * initial;
    let lhs = policy_return(mdp, policy)? - f.at_init(mdp.init_dist());
    Ok((lhs - rhs).abs())
}

/// Residual of the uneven-partition identity
/// `V^π(d_0) - f(d_0) = Σ_k E_{d_{τ_k}}[A_(i_k)(s, π)]`, `i_k = τ_{k+1} - τ_k - 1`.
pub fn check_noneven_pdl<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
    f: &ValueTable<S>,
    partition: &[usize],
) -> Result<S> {
    let horizon = mdp.horizon();
    if partition.len() < 2 || partition[0] != 0 || *partition.last().unwrap() != horizon {
        return invalid("partition must start at 0 and end at the horizon");
    }
    if partition.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("partition must be strictly increasing");
    }
    let dist = state_distributions(mdp, policy)?;
    let mut rhs = S::zero();
    for w in partition.windows(2) {
        let (tau, steps) = (w[0], w[1] - w[0] - 1);
        let adv = i_step_advantage(mdp, policy, f, steps)?;
        rhs += dist.per_time[tau]
            .iter()
            .enumerate()
            .map(|(s, &d)| d * adv.under_policy(tau, s, policy))
            .sum::<S>();
    }
    let lhs = policy_return(mdp, policy)? - f.at_init(mdp.init_dist());
    Ok((lhs - rhs).abs())
}

/// λ-weighted advantage assembled from i-step advantages:
/// `Σ_{i<L} (1-λ) λ^i A_(i) + λ^L A_(L)` with `L = T - t - 1`, where the
/// tail mass lands on the horizon-clamped term (`0^0 = 1`).
pub fn lambda_advantage_geometric<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
    f: &ValueTable<S>,
    lambda: S,
) -> Result<AdvantageTable<S>> {
    check_lambda(lambda)?;
    let horizon = mdp.horizon();
    let by_i: Vec<AdvantageTable<S>> = (0..horizon)
        .map(|i| i_step_advantage(mdp, policy, f, i))
        .collect::<Result<_>>()?;
    let (n, m) = (mdp.num_base_states(), mdp.num_actions());
    let adv = (0..horizon)
        .map(|t| {
            let last = horizon - t - 1;
            (0..n)
                .map(|s| {
                    (0..m)
                        .map(|a| {
                            let mut total = S::zero();
                            for (i, table) in by_i.iter().enumerate().take(last) {
                                total += (S::one() - lambda) * lambda.powi(i as i32) * table.get(t, s, a);
                            }
                            total + lambda.powi(last as i32) * by_i[last].get(t, s, a)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(AdvantageTable::new(adv, f.clone()))
}

/// Whether `A^f(t, s, π) >= -tol` at every `(t, s)`.
pub fn is_improvable<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
    f: &ValueTable<S>,
    tol: S,
) -> Result<bool> {
    let adv = advantage_wrt_f(mdp, f)?;
    for t in 0..mdp.horizon() {
        for s in 0..mdp.num_base_states() {
            if adv.under_policy(t, s, policy) < -tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
