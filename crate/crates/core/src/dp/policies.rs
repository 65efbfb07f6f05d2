//! Policies derived from oracle values: max-following, max-aggregation,
//! generalized policy improvement and the optimal greedy policy.

use crate::dp::tables::{TabularPolicy, ValueTable};
use crate::dp::values::{optimal_value, q_from_baseline};
use crate::env::TabularMdp;
use crate::error::{invalid, Result};
use crate::scalar::{argmax, Scalar};

fn one_hot_from<S: Scalar>(
    mdp: &TabularMdp<S>,
    mut choose: impl FnMut(usize, usize) -> usize,
) -> TabularPolicy<S> {
    let choices: Vec<Vec<usize>> = (0..mdp.horizon())
        .map(|t| (0..mdp.num_base_states()).map(|s| choose(t, s)).collect())
        .collect();
    TabularPolicy::deterministic(mdp.horizon(), mdp.num_base_states(), mdp.num_actions(), |t, s| {
        choices[t][s]
    })
}

/// Follows, at every `(t, s)`, the oracle with the highest value there.
pub fn max_following_policy<S: Scalar>(
    mdp: &TabularMdp<S>,
    oracle_policies: &[TabularPolicy<S>],
    oracle_values: &[ValueTable<S>],
) -> Result<TabularPolicy<S>> {
    if oracle_policies.is_empty() || oracle_policies.len() != oracle_values.len() {
        return invalid("need one value table per oracle and at least one oracle");
    }
    for (pi, v) in oracle_policies.iter().zip(oracle_values) {
        pi.check_shape(mdp)?;
        v.check_shape(mdp)?;
    }
    let probs = (0..mdp.horizon())
        .map(|t| {
            (0..mdp.num_base_states())
                .map(|s| {
                    let vals: Vec<S> = oracle_values.iter().map(|v| v.get(t, s)).collect();
                    oracle_policies[argmax(&vals)].row(t, s).to_vec()
                })
                .collect()
        })
        .collect();
    TabularPolicy::new(probs)
}

/// Index of the oracle followed by the max-following policy at `(t, s)`.
pub fn best_oracle_index<S: Scalar>(oracle_values: &[ValueTable<S>], t: usize, s: usize) -> usize {
    let vals: Vec<S> = oracle_values.iter().map(|v| v.get(t, s)).collect();
    argmax(&vals)
}

/// One-step improvement on `f`: deterministic argmax of `A^f(t, s, .)`.
pub fn max_aggregation_policy<S: Scalar>(
    mdp: &TabularMdp<S>,
    fmax: &ValueTable<S>,
) -> Result<TabularPolicy<S>> {
    // argmax of Q^f equals argmax of A^f since f(t, s) is constant in a
    let q = q_from_baseline(mdp, fmax)?;
    Ok(one_hot_from(mdp, |t, s| argmax(&q[t][s])))
}

/// Generalized policy improvement: argmax over actions of `max_k Q^{pi_k}`.
pub fn gpi_policy<S: Scalar>(
    mdp: &TabularMdp<S>,
    oracle_q_tables: &[Vec<Vec<Vec<S>>>],
) -> Result<TabularPolicy<S>> {
    if oracle_q_tables.is_empty() {
        return invalid("generalized policy improvement needs at least one Q-table");
    }
    let m = mdp.num_actions();
    Ok(one_hot_from(mdp, |t, s| {
        let best: Vec<S> = (0..m)
            .map(|a| {
                oracle_q_tables
                    .iter()
                    .map(|q| q[t][s][a])
                    .fold(S::neg_infinity(), S::max)
            })
            .collect();
        argmax(&best)
    }))
}

/// Greedy policy with respect to the optimal values.
pub fn optimal_policy<S: Scalar>(mdp: &TabularMdp<S>) -> TabularPolicy<S> {
    let v = optimal_value(mdp);
    let q = q_from_baseline(mdp, &v).expect("optimal values share the MDP shape");
    one_hot_from(mdp, |t, s| argmax(&q[t][s]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::values::{advantage_wrt_f, fmax_baseline, policy_value};
    use crate::env::make_random_mdp;

    #[test]
    fn single_oracle_degeneracies() {
        let mdp = make_random_mdp::<f64>(4, 3, 3, 4).unwrap();
        let pi = TabularPolicy::uniform(4, 3, 3);
        let v = policy_value(&mdp, &pi).unwrap();
        let follow = max_following_policy(&mdp, &[pi.clone()], &[v.clone()]).unwrap();
        assert_eq!(follow, pi);

        // K = 1: max-aggregation is one-step improvement of the oracle and
        // GPI picks the same actions
        let fmax = fmax_baseline(&[v.clone()]).unwrap();
        let improved = max_aggregation_policy(&mdp, &fmax).unwrap();
        let q = q_from_baseline(&mdp, &v).unwrap();
        assert_eq!(gpi_policy(&mdp, &[q]).unwrap(), improved);
        let v_plus = policy_value(&mdp, &improved).unwrap();
        for t in 0..=4 {
            for s in 0..3 {
                assert!(v_plus.get(t, s) >= v.get(t, s) - 1e-12);
            }
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let mdp = crate::env::mdp::deterministic_mdp::<f64>(2, 3, 1, 0, |_, _, _| 0, |_, _, _| 0.5).unwrap();
        let pi = max_aggregation_policy(&mdp, &ValueTable::zeros(1, 2)).unwrap();
        assert_eq!(pi.row(0, 0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn max_aggregation_dominates_max_following_advantage() {
        let mdp = make_random_mdp::<f64>(13, 4, 3, 5).unwrap();
        let oracles: Vec<_> = (0..2)
            .map(|k| TabularPolicy::deterministic(5, 4, 3, move |t, s| (t + s + k) % 3))
            .collect();
        let values: Vec<_> = oracles.iter().map(|p| policy_value(&mdp, p).unwrap()).collect();
        let fmax = fmax_baseline(&values).unwrap();
        let adv = advantage_wrt_f(&mdp, &fmax).unwrap();
        let follow = max_following_policy(&mdp, &oracles, &values).unwrap();
        let agg = max_aggregation_policy(&mdp, &fmax).unwrap();
        for t in 0..5 {
            for s in 0..4 {
                let a_follow = adv.under_policy(t, s, &follow);
                assert!(a_follow >= -1e-12);
                assert!(adv.under_policy(t, s, &agg) >= a_follow - 1e-12);
            }
        }
    }
}
