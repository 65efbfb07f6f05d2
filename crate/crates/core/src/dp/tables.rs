use serde::{Deserialize, Serialize};

use crate::env::TabularMdp;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Values indexed `[t][s]` for `t` in `0..=horizon`; the final row is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "S: Scalar")]
pub struct ValueTable<S> {
    values: Vec<Vec<S>>,
}

impl<S: Scalar> ValueTable<S> {
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        Self {
            values: vec![vec![S::zero(); num_states]; horizon + 1],
        }
    }

    /// Builds a table from rows `0..horizon`; the terminal zero row is appended.
    pub fn from_rows(mut rows: Vec<Vec<S>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != width) {
            return invalid("value rows must share a width");
        }
        rows.push(vec![S::zero(); width]);
        Ok(Self { values: rows })
    }

    /// Accepts a full `[0..=horizon]` table whose final row must be zero.
    pub fn from_full(values: Vec<Vec<S>>) -> Result<Self> {
        match values.last() {
            Some(last) if last.iter().all(|v| *v == S::zero()) => Ok(Self { values }),
            _ => invalid("value table must end with an all-zero row at t = horizon"),
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn num_states(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, t: usize, s: usize) -> S {
        self.values[t][s]
    }

    pub(crate) fn set(&mut self, t: usize, s: usize, v: S) {
        self.values[t][s] = v;
    }

    pub fn row(&self, t: usize) -> &[S] {
        &self.values[t]
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.values
    }

    /// `f(d_0) = sum_s d_0(s) f(0, s)`.
    pub fn at_init(&self, init_dist: &[S]) -> S {
        crate::scalar::dot(init_dist, &self.values[0])
    }

    pub fn map(&self, f: impl Fn(usize, usize, S) -> S) -> Self {
        let horizon = self.horizon();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(t, row)| {
                row.iter()
                    .enumerate()
                    .map(|(s, &v)| if t == horizon { S::zero() } else { f(t, s, v) })
                    .collect()
            })
            .collect();
        Self { values }
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMdp<S>) -> Result<()> {
        if self.horizon() != mdp.horizon() || self.num_states() != mdp.num_base_states() {
            return invalid(format!(
                "value table shape ({}, {}) does not match MDP ({}, {})",
                self.horizon(),
                self.num_states(),
                mdp.horizon(),
                mdp.num_base_states()
            ));
        }
        if self.values[self.horizon()].iter().any(|v| *v != S::zero()) {
            return invalid("baseline must vanish at t = horizon");
        }
        Ok(())
    }
}

/// Advantages indexed `[t][s][a]` for `t` in `0..horizon`, together with the
/// baseline they were computed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct AdvantageTable<S> {
    adv: Vec<Vec<Vec<S>>>,
    #[serde(skip)]
    baseline: Option<ValueTable<S>>,
}

impl<S: Scalar> AdvantageTable<S> {
    pub(crate) fn new(adv: Vec<Vec<Vec<S>>>, baseline: ValueTable<S>) -> Self {
        Self {
            adv,
            baseline: Some(baseline),
        }
    }

    pub fn get(&self, t: usize, s: usize, a: usize) -> S {
        self.adv[t][s][a]
    }

    pub fn row(&self, t: usize, s: usize) -> &[S] {
        &self.adv[t][s]
    }

    pub fn raw(&self) -> &[Vec<Vec<S>>] {
        &self.adv
    }

    pub fn baseline(&self) -> Option<&ValueTable<S>> {
        self.baseline.as_ref()
    }

    /// `A(t, s, pi) = sum_a pi(a|t,s) A(t, s, a)`.
    pub fn under_policy(&self, t: usize, s: usize, policy: &TabularPolicy<S>) -> S {
        crate::scalar::dot(policy.row(t, s), &self.adv[t][s])
    }

    /// `Q = A + f`, i.e. the advantage shifted back by its baseline.
    pub fn q_values(&self) -> Option<Vec<Vec<Vec<S>>>> {
        let base = self.baseline.as_ref()?;
        Some(
            self.adv
                .iter()
                .enumerate()
                .map(|(t, block)| {
                    block
                        .iter()
                        .enumerate()
                        .map(|(s, row)| row.iter().map(|&a| a + base.get(t, s)).collect())
                        .collect()
                })
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        let mut worst = S::zero();
        for (ba, bb) in self.adv.iter().zip(&other.adv) {
            for (ra, rb) in ba.iter().zip(bb) {
                for (&x, &y) in ra.iter().zip(rb) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}

/// Time-indexed state distributions `d_t` and their uniform average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StateDistributionTable<S> {
    pub per_time: Vec<Vec<S>>,
    pub average: Vec<S>,
}

/// Time-indexed stochastic policy `pi(a | t, s)`, rows indexed `[t][s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TabularPolicy<S> {
    probs: Vec<Vec<Vec<S>>>,
}

impl<S: Scalar> TabularPolicy<S> {
    pub fn new(probs: Vec<Vec<Vec<S>>>) -> Result<Self> {
        for (t, block) in probs.iter().enumerate() {
            for (s, row) in block.iter().enumerate() {
                let total: S = row.iter().copied().sum();
                if row.iter().any(|p| *p < S::zero() || !p.is_finite())
                    || (total - S::one()).abs() > S::simplex_tolerance()
                {
                    return invalid(format!("policy row ({t},{s}) is not a distribution"));
                }
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = S::one() / S::from_usize_lossy(num_actions);
        Self {
            probs: vec![vec![vec![p; num_actions]; num_states]; horizon],
        }
    }

    /// Deterministic policy from a chooser `(t, s) -> a`.
    pub fn deterministic(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        choose: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let probs = (0..horizon)
            .map(|t| {
                (0..num_states)
                    .map(|s| {
                        let mut row = vec![S::zero(); num_actions];
                        row[choose(t, s)] = S::one();
                        row
                    })
                    .collect()
            })
            .collect();
        Self { probs }
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn num_states(&self) -> usize {
        self.probs.first().map(Vec::len).unwrap_or(0)
    }

    pub fn num_actions(&self) -> usize {
        self.probs
            .first()
            .and_then(|b| b.first())
            .map(Vec::len)
            .unwrap_or(0)
    }

    pub fn row(&self, t: usize, s: usize) -> &[S] {
        &self.probs[t][s]
    }

    pub fn prob(&self, t: usize, s: usize, a: usize) -> S {
        self.probs[t][s][a]
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMdp<S>) -> Result<()> {
        if self.horizon() != mdp.horizon()
            || self.num_states() != mdp.num_base_states()
            || self.num_actions() != mdp.num_actions()
        {
            return invalid("policy shape does not match the MDP");
        }
        Ok(())
    }
}
