//! Policy parameterizations, sampling, score functions, whitening and
//! behavior cloning.

pub mod clone;
pub mod params;
pub mod whitening;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use clone::behavior_clone;
pub use params::{FeatureMap, PolicyKind, PolicyParams, PolicyShape};
pub use whitening::Whitener;

use crate::dp::tables::TabularPolicy;
use crate::env::{sample_index, Action, Observation};
use crate::error::{invalid, MambaError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution<S> {
    Categorical(Vec<S>),
    Gaussian { mean: Vec<S>, std: Vec<S> },
}

impl<S: Scalar> ActionDistribution<S> {
    pub fn sample(&self, rng: &mut dyn RngCore) -> Action<S> {
        match self {
            Self::Categorical(p) => Action::Discrete(sample_index(p, rng)),
            Self::Gaussian { mean, std } => Action::Continuous(
                mean.iter()
                    .zip(std)
                    .map(|(&m, &s)| m + s * S::lit(rng.sample::<f64, _>(StandardNormal)))
                    .collect(),
            ),
        }
    }

    pub fn log_prob(&self, action: &Action<S>) -> Result<S> {
        match (self, action) {
            (Self::Categorical(p), Action::Discrete(a)) => match p.get(*a) {
                Some(&pa) if pa > S::zero() => Ok(pa.ln()),
                Some(_) => Err(MambaError::NumericDomain(format!("action {a} has probability zero"))),
                None => invalid(format!("action {a} out of range for {} actions", p.len())),
            },
            (Self::Gaussian { mean, std }, Action::Continuous(x)) if x.len() == mean.len() => {
                let half_log_two_pi = S::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
                let mut total = S::zero();
                for ((&xi, &m), &s) in x.iter().zip(mean).zip(std) {
                    if s <= S::zero() {
                        return Err(MambaError::NumericDomain("degenerate Gaussian scale".into()));
                    }
                    let z = (xi - m) / s;
                    total -= S::lit(0.5) * z * z + s.ln() + half_log_two_pi;
                }
                Ok(total)
            }
            _ => invalid("action does not match the distribution"),
        }
    }

    pub fn mode(&self) -> Action<S> {
        match self {
            Self::Categorical(p) => Action::Discrete(crate::scalar::argmax(p)),
            Self::Gaussian { mean, .. } => Action::Continuous(mean.clone()),
        }
    }
}

/// Anything that maps observations to action distributions.
pub trait Policy<S: Scalar>: Send + Sync {
    fn distribution(&self, obs: &Observation<S>) -> Result<ActionDistribution<S>>;

    fn sample_action(&self, obs: &Observation<S>, rng: &mut dyn RngCore) -> Result<Action<S>> {
        Ok(self.distribution(obs)?.sample(rng))
    }

    fn log_prob(&self, obs: &Observation<S>, action: &Action<S>) -> Result<S> {
        self.distribution(obs)?.log_prob(action)
    }
}

impl<S: Scalar> Policy<S> for TabularPolicy<S> {
    fn distribution(&self, obs: &Observation<S>) -> Result<ActionDistribution<S>> {
        match obs.index() {
            Some(s) if obs.t < self.horizon() && s < self.num_states() => {
                Ok(ActionDistribution::Categorical(self.row(obs.t, s).to_vec()))
            }
            _ => invalid(format!("observation {obs:?} outside the policy table")),
        }
    }
}

impl<S: Scalar> Policy<S> for PolicyParams<S> {
    fn distribution(&self, obs: &Observation<S>) -> Result<ActionDistribution<S>> {
        self.action_distribution(obs)
    }
}

/// A fixed oracle, either an explicit table or a parameterized policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", tag = "oracle", rename_all = "snake_case")]
pub enum Oracle<S> {
    Table { policy: TabularPolicy<S> },
    Params { policy: PolicyParams<S> },
}

impl<S: Scalar> Oracle<S> {
    pub fn table(&self) -> Option<&TabularPolicy<S>> {
        match self {
            Self::Table { policy } => Some(policy),
            Self::Params { .. } => None,
        }
    }
}

impl<S: Scalar> Policy<S> for Oracle<S> {
    fn distribution(&self, obs: &Observation<S>) -> Result<ActionDistribution<S>> {
        match self {
            Self::Table { policy } => policy.distribution(obs),
            Self::Params { policy } => policy.distribution(obs),
        }
    }
}

impl<S: Scalar> From<TabularPolicy<S>> for Oracle<S> {
    fn from(policy: TabularPolicy<S>) -> Self {
        Self::Table { policy }
    }
}

impl<S: Scalar> From<PolicyParams<S>> for Oracle<S> {
    fn from(policy: PolicyParams<S>) -> Self {
        Self::Params { policy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_log_density() {
        let d = ActionDistribution::Gaussian {
            mean: vec![0.0f64],
            std: vec![1.0],
        };
        let lp = d.log_prob(&Action::Continuous(vec![1.0])).unwrap();
        assert!((lp - (-0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_action_is_a_domain_error() {
        let d = ActionDistribution::Categorical(vec![1.0f64, 0.0]);
        assert!(matches!(
            d.log_prob(&Action::Discrete(1)),
            Err(MambaError::NumericDomain(_))
        ));
        assert!(d.log_prob(&Action::Discrete(2)).is_err());
    }

    #[test]
    fn tabular_policy_samples_its_rows() {
        let pi = TabularPolicy::<f64>::deterministic(2, 3, 2, |t, s| (t + s) % 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = pi.sample_action(&Observation::tabular(1, 1), &mut rng).unwrap();
        assert_eq!(a, Action::Discrete(0));
        assert!(pi.distribution(&Observation::tabular(2, 0)).is_err());
    }

    #[test]
    fn oracle_json_round_trip() {
        let oracle: Oracle<f64> = TabularPolicy::uniform(2, 2, 3).into();
        let text = serde_json::to_string(&oracle).unwrap();
        assert_eq!(serde_json::from_str::<Oracle<f64>>(&text).unwrap(), oracle);
    }
}
