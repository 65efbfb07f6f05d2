use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Finite-horizon MDP with time-indexed dynamics.
///
/// The augmented state is the pair `(t, s)`; arrays are indexed `[t][s][a]`
/// and transition rows `[t][s][a][s']`. Values at `t = horizon` are zero by
/// convention throughout the crate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct TabularMdp<S> {
    num_base_states: usize,
    num_actions: usize,
    horizon: usize,
    init_dist: Vec<S>,
    transition: Vec<Vec<Vec<Vec<S>>>>,
    reward: Vec<Vec<Vec<S>>>,
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct MdpDocument<S> {
    num_base_states: usize,
    num_actions: usize,
    horizon: usize,
    init_dist: Vec<S>,
    transition: Vec<Vec<Vec<Vec<S>>>>,
    reward: Vec<Vec<Vec<S>>>,
}

impl<'de, S: Scalar> Deserialize<'de> for TabularMdp<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = MdpDocument::<S>::deserialize(deserializer)?;
        TabularMdp::new(
            doc.num_base_states,
            doc.num_actions,
            doc.horizon,
            doc.init_dist,
            doc.transition,
            doc.reward,
        )
        .map_err(D::Error::custom)
    }
}

fn check_simplex<S: Scalar>(row: &[S], what: impl Fn() -> String) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < S::zero()) {
        return invalid(format!("{} has a negative or non-finite entry", what()));
    }
    let total: S = row.iter().copied().sum();
    if (total - S::one()).abs() > S::simplex_tolerance() {
        return invalid(format!("{} sums to {} instead of 1", what(), total));
    }
    Ok(())
}

impl<S: Scalar> TabularMdp<S> {
    /// Builds and validates an MDP.
    pub fn new(
        num_base_states: usize,
        num_actions: usize,
        horizon: usize,
        init_dist: Vec<S>,
        transition: Vec<Vec<Vec<Vec<S>>>>,
        reward: Vec<Vec<Vec<S>>>,
    ) -> Result<Self> {
        let mdp = Self {
            num_base_states,
            num_actions,
            horizon,
            init_dist,
            transition,
            reward,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Checks shapes, stochasticity of every row and the `[0, 1]` reward range.
    pub fn validate(&self) -> Result<()> {
        let (n, m, horizon) = (self.num_base_states, self.num_actions, self.horizon);
        if n == 0 || m == 0 {
            return invalid("an MDP needs at least one state and one action");
        }
        if horizon == 0 {
            return invalid("horizon must be at least 1");
        }
        if self.init_dist.len() != n {
            return invalid(format!("init_dist has length {}, expected {n}", self.init_dist.len()));
        }
        check_simplex(&self.init_dist, || "init_dist".to_string())?;
        if self.transition.len() != horizon || self.reward.len() != horizon {
            return invalid("transition and reward need one block per time step");
        }
        for t in 0..horizon {
            if self.transition[t].len() != n || self.reward[t].len() != n {
                return invalid(format!("time {t}: expected {n} states"));
            }
            for s in 0..n {
                if self.transition[t][s].len() != m || self.reward[t][s].len() != m {
                    return invalid(format!("({t},{s}): expected {m} actions"));
                }
                for a in 0..m {
                    let row = &self.transition[t][s][a];
                    if row.len() != n {
                        return invalid(format!("transition row ({t},{s},{a}) has length {}", row.len()));
                    }
                    check_simplex(row, || format!("transition row ({t},{s},{a})"))?;
                    let r = self.reward[t][s][a];
                    if !(r >= S::zero() && r <= S::one()) {
                        return invalid(format!("reward ({t},{s},{a}) = {r} outside [0, 1]"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_base_states(&self) -> usize {
        self.num_base_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn init_dist(&self) -> &[S] {
        &self.init_dist
    }

    /// Next-state distribution `P(. | s, a)` at time `t`.
    pub fn transition(&self, t: usize, s: usize, a: usize) -> &[S] {
        &self.transition[t][s][a]
    }

    pub fn reward(&self, t: usize, s: usize, a: usize) -> S {
        self.reward[t][s][a]
    }

    /// `E_{s' ~ P(.|s,a)}[g(s')]`.
    pub fn expect_next(&self, t: usize, s: usize, a: usize, next: &[S]) -> S {
        crate::scalar::dot(&self.transition[t][s][a], next)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Same dynamics with every reward replaced by zero.
    pub fn without_rewards(&self) -> Self {
        let mut out = self.clone();
        for block in &mut out.reward {
            for row in block.iter_mut() {
                row.iter_mut().for_each(|r| *r = S::zero());
            }
        }
        out
    }
}

fn normalized_uniforms<S: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<S> {
    let raw: Vec<f64> = (0..n).map(|_| Open01.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<S> = raw.iter().map(|x| S::lit(x / total)).collect();
    // push the rounding residue into the largest entry
    let residue = S::one() - row.iter().copied().sum::<S>();
    let big = crate::scalar::argmax(&row);
    row[big] += residue;
    row
}

/// Random MDP with normalized-uniform transition rows, initial distribution
/// and uniform rewards in `[0, 1]`. Deterministic in `seed`.
pub fn make_random_mdp<S: Scalar>(
    seed: u64,
    num_base_states: usize,
    num_actions: usize,
    horizon: usize,
) -> Result<TabularMdp<S>> {
    if num_base_states < 2 || num_actions < 2 {
        return invalid("random MDPs need at least two states and two actions");
    }
    if horizon == 0 {
        return invalid("horizon must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init_dist = normalized_uniforms(&mut rng, num_base_states);
    let mut transition = Vec::with_capacity(horizon);
    let mut reward = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut p_t = Vec::with_capacity(num_base_states);
        let mut r_t = Vec::with_capacity(num_base_states);
        for _ in 0..num_base_states {
            p_t.push(
                (0..num_actions)
                    .map(|_| normalized_uniforms(&mut rng, num_base_states))
                    .collect::<Vec<_>>(),
            );
            r_t.push(
                (0..num_actions)
                    .map(|_| S::lit(rand::Rng::gen::<f64>(&mut rng)))
                    .collect::<Vec<_>>(),
            );
        }
        transition.push(p_t);
        reward.push(r_t);
    }
    TabularMdp::new(num_base_states, num_actions, horizon, init_dist, transition, reward)
}

/// Builds a time-invariant MDP from a deterministic successor function.
pub(crate) fn deterministic_mdp<S: Scalar>(
    num_base_states: usize,
    num_actions: usize,
    horizon: usize,
    start: usize,
    next: impl Fn(usize, usize, usize) -> usize,
    reward: impl Fn(usize, usize, usize) -> S,
) -> Result<TabularMdp<S>> {
    let mut init_dist = vec![S::zero(); num_base_states];
    init_dist[start] = S::one();
    let mut transition = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut p_t = Vec::with_capacity(num_base_states);
        let mut r_t = Vec::with_capacity(num_base_states);
        for s in 0..num_base_states {
            let mut rows = Vec::with_capacity(num_actions);
            for a in 0..num_actions {
                let mut row = vec![S::zero(); num_base_states];
                row[next(t, s, a)] = S::one();
                rows.push(row);
            }
            p_t.push(rows);
            r_t.push((0..num_actions).map(|a| reward(t, s, a)).collect());
        }
        transition.push(p_t);
        rewards.push(r_t);
    }
    TabularMdp::new(num_base_states, num_actions, horizon, init_dist, transition, rewards)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_rows_are_stochastic() {
        let mdp = make_random_mdp::<f64>(7, 3, 2, 4).unwrap();
        for t in 0..4 {
            for s in 0..3 {
                for a in 0..2 {
                    let total: f64 = mdp.transition(t, s, a).iter().sum();
                    assert!((total - 1.0).abs() <= 1e-12);
                    assert!((0.0..=1.0).contains(&mdp.reward(t, s, a)));
                }
            }
        }
    }

    #[test]
    fn random_mdp_is_deterministic_in_seed() {
        let a = make_random_mdp::<f64>(7, 3, 2, 4).unwrap();
        let b = make_random_mdp::<f64>(7, 3, 2, 4).unwrap();
        assert_eq!(a, b);
        let c = make_random_mdp::<f64>(8, 3, 2, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_sizes_are_rejected() {
        assert!(make_random_mdp::<f64>(1, 0, 2, 3).is_err());
        assert!(make_random_mdp::<f64>(1, 3, 0, 3).is_err());
        assert!(make_random_mdp::<f64>(1, 3, 2, 0).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mdp = make_random_mdp::<f64>(3, 2, 2, 2).unwrap();
        let text = mdp.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["num_base_states", "num_actions", "horizon", "init_dist", "transition", "reward"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert_eq!(TabularMdp::<f64>::from_json(&text).unwrap(), mdp);

        let mut broken = value.clone();
        broken["reward"][0][0][0] = serde_json::json!(1.5);
        assert!(TabularMdp::<f64>::from_json(&broken.to_string()).is_err());
        let mut broken = value;
        broken["transition"][1][0][1][0] = serde_json::json!(0.0);
        assert!(TabularMdp::<f64>::from_json(&broken.to_string()).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let mdp = make_random_mdp::<f32>(11, 4, 3, 3).unwrap();
        assert_eq!(mdp.num_base_states(), 4);
    }
}
