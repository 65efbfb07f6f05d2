//! Multi-step and λ-weighted advantages under a continuation policy.

use crate::dp::tables::{AdvantageTable, TabularPolicy, ValueTable};
use crate::dp::values::advantage_wrt_f;
use crate::env::TabularMdp;
use crate::error::{invalid, Result};
use crate::scalar::{dot, Scalar};

pub(crate) fn check_lambda<S: Scalar>(lambda: S) -> Result<()> {
    if !(lambda >= S::zero() && lambda <= S::one()) {
        return invalid(format!("lambda = {lambda} outside [0, 1]"));
    }
    Ok(())
}

/// λ-weighted advantage via the TD-residual recursion
/// `A_λ(t,s,a) = δ(t,s,a) + λ E_{s'} E_{a'~π}[A_λ(t+1,s',a')]`, `A_λ(T) = 0`.
///
/// `λ = 0` returns the one-step advantage of `f` and `λ = 1` returns `Q^π - f`.
pub fn lambda_advantage_exact<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
    f: &ValueTable<S>,
    lambda: S,
) -> Result<AdvantageTable<S>> {
    check_lambda(lambda)?;
    policy.check_shape(mdp)?;
    let delta = advantage_wrt_f(mdp, f)?;
    let (n, m, horizon) = (mdp.num_base_states(), mdp.num_actions(), mdp.horizon());
    let mut adv: Vec<Vec<Vec<S>>> = delta.raw().to_vec();
    // continuation[s'] = E_{a' ~ π(.|t+1, s')} A_λ(t+1, s', a')
    let mut continuation = vec![S::zero(); n];
    for t in (0..horizon).rev() {
        if lambda != S::zero() {
            for s in 0..n {
                for a in 0..m {
                    adv[t][s][a] += lambda * mdp.expect_next(t, s, a, &continuation);
                }
            }
        }
        for (s, c) in continuation.iter_mut().enumerate() {
            *c = dot(policy.row(t, s), &adv[t][s]);
        }
    }
    Ok(AdvantageTable::new(adv, f.clone()))
}

/// `A_(i)(t,s,a)`: expected reward over steps `t..=t+i` (continuing with π)
/// plus `f(t+i+1)`, minus `f(t,s)`. Beyond the horizon the bootstrap is the
/// terminal zero, so every `i >= T - t - 1` gives the full-return advantage.
pub fn i_step_advantage<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
    f: &ValueTable<S>,
    i: usize,
) -> Result<AdvantageTable<S>> {
    policy.check_shape(mdp)?;
    f.check_shape(mdp)?;
    let (n, m, horizon) = (mdp.num_base_states(), mdp.num_actions(), mdp.horizon());
    // w[u][s]: j more on-policy rewards from (u, s) then f; starts at j = 0 (w = f)
    let mut w: Vec<Vec<S>> = f.rows().to_vec();
    for _ in 0..i {
        let mut next = vec![vec![S::zero(); n]; horizon + 1];
        for u in 0..horizon {
            for s in 0..n {
                next[u][s] = (0..m)
                    .map(|a| {
                        policy.prob(u, s, a)
                            * (mdp.reward(u, s, a) + mdp.expect_next(u, s, a, &w[u + 1]))
                    })
                    .sum();
            }
        }
        w = next;
    }
    let adv = (0..horizon)
        .map(|t| {
            (0..n)
                .map(|s| {
                    (0..m)
                        .map(|a| mdp.reward(t, s, a) + mdp.expect_next(t, s, a, &w[t + 1]) - f.get(t, s))
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(AdvantageTable::new(adv, f.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::values::{policy_q_values, policy_value};
    use crate::env::make_random_mdp;

    fn random_baseline(mdp: &TabularMdp<f64>, seed: u64) -> ValueTable<f64> {
        let other = make_random_mdp::<f64>(seed, mdp.num_base_states(), 2, mdp.horizon()).unwrap();
        let v = policy_value(&other, &TabularPolicy::uniform(mdp.horizon(), mdp.num_base_states(), 2)).unwrap();
        v.map(|t, s, x| x * 0.7 - 0.1 * (t + s) as f64)
    }

    #[test]
    fn lambda_zero_is_one_step_advantage() {
        let mdp = make_random_mdp::<f64>(1, 3, 2, 5).unwrap();
        let pi = TabularPolicy::uniform(5, 3, 2);
        let f = random_baseline(&mdp, 2);
        let a0 = lambda_advantage_exact(&mdp, &pi, &f, 0.0).unwrap();
        assert_eq!(a0, advantage_wrt_f(&mdp, &f).unwrap());
        assert_eq!(i_step_advantage(&mdp, &pi, &f, 0).unwrap(), advantage_wrt_f(&mdp, &f).unwrap());
    }

    #[test]
    fn lambda_one_and_long_horizon_give_q_minus_f() {
        let mdp = make_random_mdp::<f64>(3, 4, 3, 6).unwrap();
        let pi = TabularPolicy::deterministic(6, 4, 3, |t, s| (t * s) % 3);
        let f = random_baseline(&mdp, 4);
        let q = policy_q_values(&mdp, &pi).unwrap();
        let a1 = lambda_advantage_exact(&mdp, &pi, &f, 1.0).unwrap();
        let a_long = i_step_advantage(&mdp, &pi, &f, 6).unwrap();
        for t in 0..6 {
            for s in 0..4 {
                for a in 0..3 {
                    let expected = q[t][s][a] - f.get(t, s);
                    assert!((a1.get(t, s, a) - expected).abs() < 1e-12);
                    assert!((a_long.get(t, s, a) - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_lambda_outside_unit_interval() {
        let mdp = make_random_mdp::<f64>(3, 2, 2, 2).unwrap();
        let pi = TabularPolicy::uniform(2, 2, 2);
        let f = ValueTable::zeros(2, 2);
        assert!(lambda_advantage_exact(&mdp, &pi, &f, 1.5).is_err());
        assert!(lambda_advantage_exact(&mdp, &pi, &f, -0.1).is_err());
    }
}
