use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::tables::ValueTable;
use crate::env::Observation;
use crate::error::{invalid, Result};
use crate::nn;
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::policy::params::whitened_input;
use crate::policy::{FeatureMap, Whitener};
use crate::scalar::Scalar;
use crate::value::buffer::ReplayBuffer;

pub const DEFAULT_VALUE_HIDDEN: [usize; 2] = [256, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    TabularAverage,
    Linear,
    Mlp,
}

/// Value approximator over `(t, state)` observations. Every kind predicts
/// exactly zero once `t` reaches the horizon.
///
/// Linear and MLP outputs are multiplied by `scale` (the horizon by
/// default), so the fitted function works with targets in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", tag = "kind", rename_all = "kebab-case")]
pub enum ValueModel<S> {
    /// Weighted means of the targets seen at each `(t, s)`; unseen pairs
    /// fall back to `prior`.
    TabularAverage {
        horizon: usize,
        num_states: usize,
        prior: Vec<Vec<S>>,
        sums: Vec<Vec<S>>,
        weights: Vec<Vec<S>>,
    },
    Linear {
        horizon: usize,
        features: FeatureMap,
        theta: Vec<S>,
        whitener: Option<Whitener<S>>,
        scale: S,
    },
    Mlp {
        horizon: usize,
        obs_dim: usize,
        hidden: Vec<usize>,
        theta: Vec<S>,
        whitener: Whitener<S>,
        scale: S,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            batch: 128,
            lr: 0.001,
        }
    }
}

impl<S: Scalar> ValueModel<S> {
    pub fn tabular(horizon: usize, num_states: usize) -> Self {
        Self::TabularAverage {
            horizon,
            num_states,
            prior: vec![vec![S::zero(); num_states]; horizon],
            sums: vec![vec![S::zero(); num_states]; horizon],
            weights: vec![vec![S::zero(); num_states]; horizon],
        }
    }

    /// Tabular model that reproduces an exact value table until data
    /// arrives.
    pub fn from_table(table: &ValueTable<S>) -> Self {
        let (horizon, n) = (table.horizon(), table.num_states());
        Self::TabularAverage {
            horizon,
            num_states: n,
            prior: table.rows()[..horizon].to_vec(),
            sums: vec![vec![S::zero(); n]; horizon],
            weights: vec![vec![S::zero(); n]; horizon],
        }
    }

    pub fn linear(horizon: usize, features: FeatureMap) -> Self {
        let whitener = match features {
            FeatureMap::Continuous { dim } => Some(Whitener::new(dim + 1)),
            _ => None,
        };
        Self::Linear {
            horizon,
            theta: vec![S::zero(); features.len()],
            features,
            whitener,
            scale: S::from_usize_lossy(horizon),
        }
    }

    pub fn mlp(horizon: usize, obs_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if hidden.contains(&0) {
            return invalid("hidden layers must be nonempty");
        }
        let sizes = mlp_sizes(obs_dim, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::Mlp {
            horizon,
            obs_dim,
            hidden: hidden.to_vec(),
            theta: nn::init(&sizes, &mut rng, 1.0),
            whitener: Whitener::new(obs_dim + 1),
            scale: S::from_usize_lossy(horizon),
        })
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Self::TabularAverage { .. } => ValueKind::TabularAverage,
            Self::Linear { .. } => ValueKind::Linear,
            Self::Mlp { .. } => ValueKind::Mlp,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Self::TabularAverage { horizon, .. } | Self::Linear { horizon, .. } | Self::Mlp { horizon, .. } => *horizon,
        }
    }

    pub fn predict(&self, obs: &Observation<S>) -> Result<S> {
        if obs.t >= self.horizon() {
            return Ok(S::zero());
        }
        match self {
            Self::TabularAverage {
                num_states,
                prior,
                sums,
                weights,
                ..
            } => {
                let s = tabular_index(obs, *num_states)?;
                let w = weights[obs.t][s];
                Ok(if w > S::zero() { sums[obs.t][s] / w } else { prior[obs.t][s] })
            }
            Self::Linear {
                features,
                theta,
                whitener,
                scale,
                ..
            } => {
                let phi = features.features(obs, whitener.as_ref())?;
                Ok(*scale * phi.iter().map(|&(i, v)| theta[i] * v).sum::<S>())
            }
            Self::Mlp {
                obs_dim,
                hidden,
                theta,
                whitener,
                scale,
                ..
            } => {
                let x = whitened_input(obs, *obs_dim, Some(whitener))?;
                let acts = nn::forward(&mlp_sizes(*obs_dim, hidden), theta, &x);
                Ok(*scale * acts[acts.len() - 1][0])
            }
        }
    }

    /// Value table over `(t, s)` for tabular observations.
    pub fn to_table(&self, num_states: usize) -> Result<ValueTable<S>> {
        let rows = (0..self.horizon())
            .map(|t| (0..num_states).map(|s| self.predict(&Observation::tabular(t, s))).collect())
            .collect::<Result<Vec<Vec<S>>>>()?;
        ValueTable::from_rows(rows)
    }
}

fn mlp_sizes(obs_dim: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![obs_dim + 1];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

fn tabular_index<S: Scalar>(obs: &Observation<S>, num_states: usize) -> Result<usize> {
    match obs.index() {
        Some(s) if s < num_states => Ok(s),
        _ => invalid(format!("observation {obs:?} is not a state index below {num_states}")),
    }
}

/// Fits a model to the weighted Monte-Carlo targets in `buffer`.
///
/// Tabular models take the exact weighted means of the buffer. Linear and
/// MLP models first fold the newest iteration's inputs into their whitener,
/// then run `config.steps` Adam steps on minibatches of the weighted
/// squared error.
pub fn monte_carlo_regression<S: Scalar>(
    model: &ValueModel<S>,
    buffer: &ReplayBuffer<S>,
    config: &RegressionConfig,
    seed: u64,
) -> Result<ValueModel<S>> {
    if buffer.is_empty() {
        return invalid("value regression needs a nonempty buffer");
    }
    let mut model = model.clone();
    if let ValueModel::TabularAverage {
        horizon,
        num_states,
        sums,
        weights,
        ..
    } = &mut model
    {
        for row in sums.iter_mut().chain(weights.iter_mut()) {
            row.iter_mut().for_each(|v| *v = S::zero());
        }
        for sample in buffer.samples() {
            if sample.obs.t >= *horizon {
                continue;
            }
            let s = tabular_index(&sample.obs, *num_states)?;
            sums[sample.obs.t][s] += sample.weight * sample.target;
            weights[sample.obs.t][s] += sample.weight;
        }
        return Ok(model);
    }

    let newest = buffer.iterations().max();
    let fresh: Vec<Vec<S>> = buffer
        .iterations()
        .zip(buffer.samples())
        .filter(|(it, _)| Some(*it) == newest)
        .filter_map(|(_, s)| s.obs.features_with_time())
        .collect();
    match &mut model {
        ValueModel::Linear {
            whitener: Some(w), ..
        } => *w = w.update(&fresh)?,
        ValueModel::Mlp { whitener, .. } => *whitener = whitener.update(&fresh)?,
        _ => {}
    }

    let num_params = match &model {
        ValueModel::Linear { theta, .. } | ValueModel::Mlp { theta, .. } => theta.len(),
        ValueModel::TabularAverage { .. } => 0,
    };
    let mut opt = OptimizerState::new(OptimizerConfig::adam().with_lr(config.lr), num_params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = buffer.len();
    let batch = config.batch.max(1).min(n);
    for _ in 0..config.steps {
        let chosen: Vec<usize> = if batch == n {
            (0..n).collect()
        } else {
            sample(&mut rng, n, batch).into_vec()
        };
        let mut grad = vec![S::zero(); num_params];
        let norm = S::lit(2.0) / S::from_usize_lossy(batch);
        for &i in &chosen {
            let sample = buffer.get(i);
            if sample.obs.t >= model.horizon() {
                continue;
            }
            let residual = model.predict(&sample.obs)? - sample.target;
            let coef = norm * sample.weight * residual;
            accumulate_output_gradient(&model, &sample.obs, coef, &mut grad)?;
        }
        let theta = match &mut model {
            ValueModel::Linear { theta, .. } | ValueModel::Mlp { theta, .. } => theta,
            ValueModel::TabularAverage { .. } => unreachable!("handled above"),
        };
        let (next, updated) = opt.step(theta, &grad, &[])?;
        opt = next;
        *theta = updated;
    }
    Ok(model)
}

/// Adds `coef * d predict(obs) / d theta` to `grad`.
fn accumulate_output_gradient<S: Scalar>(model: &ValueModel<S>, obs: &Observation<S>, coef: S, grad: &mut [S]) -> Result<()> {
    match model {
        ValueModel::Linear {
            features,
            whitener,
            scale,
            ..
        } => {
            for (i, v) in features.features(obs, whitener.as_ref())? {
                grad[i] += coef * *scale * v;
            }
        }
        ValueModel::Mlp {
            obs_dim,
            hidden,
            theta,
            whitener,
            scale,
            ..
        } => {
            let sizes = mlp_sizes(*obs_dim, hidden);
            let x = whitened_input(obs, *obs_dim, Some(whitener))?;
            let acts = nn::forward(&sizes, theta, &x);
            nn::backward(&sizes, theta, &acts, &[coef * *scale], grad);
        }
        ValueModel::TabularAverage { .. } => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::WeightedReturnSample;

    fn sample(t: usize, s: usize, target: f64, weight: f64) -> WeightedReturnSample<f64> {
        WeightedReturnSample {
            obs: Observation::tabular(t, s),
            target,
            weight,
        }
    }

    #[test]
    fn tabular_weighted_means() {
        let model = ValueModel::<f64>::tabular(3, 2);
        let mut buf = ReplayBuffer::new(10);
        buf.insert(0, [sample(0, 1, 2.0, 1.0), sample(0, 1, 4.0, 1.0)]);
        let fitted = monte_carlo_regression(&model, &buf, &RegressionConfig::default(), 0).unwrap();
        assert_eq!(fitted.predict(&Observation::tabular(0, 1)).unwrap(), 3.0);

        let mut buf = ReplayBuffer::new(10);
        buf.insert(0, [sample(1, 0, 2.0, 1.0), sample(1, 0, 5.0, 2.0)]);
        let fitted = monte_carlo_regression(&model, &buf, &RegressionConfig::default(), 0).unwrap();
        assert_eq!(fitted.predict(&Observation::tabular(1, 0)).unwrap(), 4.0);
        assert_eq!(fitted.predict(&Observation::tabular(3, 0)).unwrap(), 0.0);
    }

    #[test]
    fn injected_table_is_reproduced() {
        let table = ValueTable::from_rows(vec![vec![0.5, 0.25], vec![1.0, 0.0]]).unwrap();
        let model = ValueModel::from_table(&table);
        assert_eq!(model.to_table(2).unwrap(), table);
    }

    #[test]
    fn linear_model_fits_linear_targets() {
        // target = 0.5 x0 - 0.25 x1 + 0.1 t + 1
        let horizon = 4;
        let mut buf = ReplayBuffer::new(1);
        let mut samples = Vec::new();
        for t in 0..horizon {
            for k in 0..6 {
                let x = vec![(k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()];
                let target = 0.5 * x[0] - 0.25 * x[1] + 0.1 * t as f64 + 1.0;
                samples.push(WeightedReturnSample {
                    obs: Observation::continuous(t, x),
                    target,
                    weight: 1.0,
                });
            }
        }
        buf.insert(0, samples.clone());
        let model = ValueModel::<f64>::linear(horizon, FeatureMap::Continuous { dim: 2 });
        let config = RegressionConfig {
            steps: 20_000,
            batch: 1024,
            lr: 0.01,
        };
        let fitted = monte_carlo_regression(&model, &buf, &config, 0).unwrap();
        // anneal, Adam at a fixed rate hovers around the optimum
        let fine = RegressionConfig { lr: 1e-4, ..config };
        let fitted = monte_carlo_regression(&fitted, &buf, &fine, 1).unwrap();
        let mse: f64 = samples
            .iter()
            .map(|s| (fitted.predict(&s.obs).unwrap() - s.target).powi(2))
            .sum::<f64>()
            / samples.len() as f64;
        assert!(mse < 1e-6, "{mse}");
    }

    #[test]
    fn mlp_regression_reduces_error_and_respects_the_horizon() {
        let horizon = 5;
        let mut buf = ReplayBuffer::new(1);
        let samples: Vec<_> = (0..horizon)
            .flat_map(|t| {
                (0..8).map(move |k| {
                    let x = (k as f64) / 4.0 - 1.0;
                    WeightedReturnSample {
                        obs: Observation::continuous(t, vec![x]),
                        target: (horizon - t) as f64 * (0.5 + 0.3 * x),
                        weight: 1.0,
                    }
                })
            })
            .collect();
        buf.insert(0, samples.clone());
        let model = ValueModel::<f64>::mlp(horizon, 1, &[16, 16], 3).unwrap();
        let err = |m: &ValueModel<f64>| {
            samples
                .iter()
                .map(|s| (m.predict(&s.obs).unwrap() - s.target).powi(2))
                .sum::<f64>()
        };
        let config = RegressionConfig {
            steps: 500,
            batch: 16,
            lr: 0.01,
        };
        let fitted = monte_carlo_regression(&model, &buf, &config, 0).unwrap();
        assert!(err(&fitted) < 0.2 * err(&model));
        assert_eq!(fitted.predict(&Observation::continuous(horizon, vec![0.3])).unwrap(), 0.0);
        let text = serde_json::to_string(&fitted).unwrap();
        assert_eq!(serde_json::from_str::<ValueModel<f64>>(&text).unwrap(), fitted);
    }

    #[test]
    fn empty_buffer_is_rejected() {
        let buf = ReplayBuffer::<f64>::new(3);
        assert!(monte_carlo_regression(&ValueModel::tabular(2, 2), &buf, &RegressionConfig::default(), 0).is_err());
    }
}
