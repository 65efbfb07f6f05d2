use crate::dp::tables::{AdvantageTable, StateDistributionTable, TabularPolicy, ValueTable};
use crate::env::TabularMdp;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// `V^pi` by backward recursion from `V(T, .) = 0`.
pub fn policy_value<S: Scalar>(mdp: &TabularMdp<S>, policy: &TabularPolicy<S>) -> Result<ValueTable<S>> {
    policy.check_shape(mdp)?;
    let (n, m, horizon) = (mdp.num_base_states(), mdp.num_actions(), mdp.horizon());
    let mut v = ValueTable::zeros(horizon, n);
    for t in (0..horizon).rev() {
        for s in 0..n {
            let mut total = S::zero();
            for a in 0..m {
                let p = policy.prob(t, s, a);
                if p != S::zero() {
                    total += p * (mdp.reward(t, s, a) + mdp.expect_next(t, s, a, v.row(t + 1)));
                }
            }
            v.set(t, s, total);
        }
    }
    Ok(v)
}

/// One-step lookahead `Q^f(t, s, a) = r(s, a) + E[f(t+1, s')]`.
pub fn q_from_baseline<S: Scalar>(mdp: &TabularMdp<S>, f: &ValueTable<S>) -> Result<Vec<Vec<Vec<S>>>> {
    f.check_shape(mdp)?;
    let (n, m) = (mdp.num_base_states(), mdp.num_actions());
    Ok((0..mdp.horizon())
        .map(|t| {
            (0..n)
                .map(|s| {
                    (0..m)
                        .map(|a| mdp.reward(t, s, a) + mdp.expect_next(t, s, a, f.row(t + 1)))
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// `A^f(t, s, a) = r(s, a) + E[f(t+1, s')] - f(t, s)`.
pub fn advantage_wrt_f<S: Scalar>(mdp: &TabularMdp<S>, f: &ValueTable<S>) -> Result<AdvantageTable<S>> {
    let mut q = q_from_baseline(mdp, f)?;
    for (t, block) in q.iter_mut().enumerate() {
        for (s, row) in block.iter_mut().enumerate() {
            let base = f.get(t, s);
            row.iter_mut().for_each(|x| *x -= base);
        }
    }
    Ok(AdvantageTable::new(q, f.clone()))
}

/// Q-table of a policy: `Q^pi = A^{V^pi} + V^pi`.
pub fn policy_q_values<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
) -> Result<Vec<Vec<Vec<S>>>> {
    let v = policy_value(mdp, policy)?;
    q_from_baseline(mdp, &v)
}

/// Pointwise maximum of several value tables.
pub fn fmax_baseline<S: Scalar>(values: &[ValueTable<S>]) -> Result<ValueTable<S>> {
    let first = match values.first() {
        Some(v) => v,
        None => return invalid("max-aggregation needs at least one value table"),
    };
    if values
        .iter()
        .any(|v| v.horizon() != first.horizon() || v.num_states() != first.num_states())
    {
        return invalid("value tables must share a shape");
    }
    Ok(first.map(|t, s, _| {
        values
            .iter()
            .map(|v| v.get(t, s))
            .fold(S::neg_infinity(), S::max)
    }))
}

/// Optimal values `V^*` by backward induction.
pub fn optimal_value<S: Scalar>(mdp: &TabularMdp<S>) -> ValueTable<S> {
    let (n, m, horizon) = (mdp.num_base_states(), mdp.num_actions(), mdp.horizon());
    let mut v = ValueTable::zeros(horizon, n);
    for t in (0..horizon).rev() {
        for s in 0..n {
            let best = (0..m)
                .map(|a| mdp.reward(t, s, a) + mdp.expect_next(t, s, a, v.row(t + 1)))
                .fold(S::neg_infinity(), S::max);
            v.set(t, s, best);
        }
    }
    v
}

/// Forward propagation of `d_t^pi` and its average over `t`.
pub fn state_distributions<S: Scalar>(
    mdp: &TabularMdp<S>,
    policy: &TabularPolicy<S>,
) -> Result<StateDistributionTable<S>> {
    policy.check_shape(mdp)?;
    let (n, m, horizon) = (mdp.num_base_states(), mdp.num_actions(), mdp.horizon());
    let mut per_time = Vec::with_capacity(horizon);
    per_time.push(mdp.init_dist().to_vec());
    for t in 0..horizon - 1 {
        let current = &per_time[t];
        let mut next = vec![S::zero(); n];
        for s in 0..n {
            if current[s] == S::zero() {
                continue;
            }
            for a in 0..m {
                let w = current[s] * policy.prob(t, s, a);
                if w == S::zero() {
                    continue;
                }
                for (acc, &p) in next.iter_mut().zip(mdp.transition(t, s, a)) {
                    *acc += w * p;
                }
            }
        }
        per_time.push(next);
    }
    let scale = S::one() / S::from_usize_lossy(horizon);
    let average = (0..n)
        .map(|s| per_time.iter().map(|d| d[s]).sum::<S>() * scale)
        .collect();
    Ok(StateDistributionTable { per_time, average })
}

/// `T * E_{s ~ d^pi}[g(t, s)] = sum_t sum_s d_t(s) g(t, s)`.
pub(crate) fn sum_over_visits<S: Scalar>(
    dist: &StateDistributionTable<S>,
    mut g: impl FnMut(usize, usize) -> S,
) -> S {
    let mut total = S::zero();
    for (t, d) in dist.per_time.iter().enumerate() {
        for (s, &w) in d.iter().enumerate() {
            if w != S::zero() {
                total += w * g(t, s);
            }
        }
    }
    total
}

/// `V^pi(d_0)`.
pub fn policy_return<S: Scalar>(mdp: &TabularMdp<S>, policy: &TabularPolicy<S>) -> Result<S> {
    Ok(policy_value(mdp, policy)?.at_init(mdp.init_dist()))
}
