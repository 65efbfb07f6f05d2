use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dp::tables::TabularPolicy;
use crate::env::{Action, Observation};
use crate::error::{invalid, MambaError, Result};
use crate::nn;
use crate::policy::whitening::Whitener;
use crate::policy::ActionDistribution;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    TabularSoftmax,
    LinearSoftmax,
    GaussianMlp,
}

/// Features fed to a linear-softmax policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureMap {
    /// Stationary indicator of the base state.
    OneHotState { num_states: usize },
    /// Indicator of the `(t, s)` pair.
    OneHotTimeState { horizon: usize, num_states: usize },
    /// Raw features with time appended, whitened, plus a bias term.
    Continuous { dim: usize },
}

impl FeatureMap {
    pub fn len(&self) -> usize {
        match *self {
            Self::OneHotState { num_states } => num_states,
            Self::OneHotTimeState { horizon, num_states } => horizon * num_states,
            Self::Continuous { dim } => dim + 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feature vector as `(index, value)` pairs; continuous inputs are
    /// whitened when a whitener is given.
    pub fn features<S: Scalar>(&self, obs: &Observation<S>, whitener: Option<&Whitener<S>>) -> Result<Vec<(usize, S)>> {
        match *self {
            Self::OneHotState { num_states } => match obs.index() {
                Some(s) if s < num_states => Ok(vec![(s, S::one())]),
                _ => invalid(format!("observation {obs:?} is not a state index below {num_states}")),
            },
            Self::OneHotTimeState { horizon, num_states } => match obs.index() {
                Some(s) if s < num_states && obs.t < horizon => Ok(vec![(obs.t * num_states + s, S::one())]),
                _ => invalid(format!("observation {obs:?} outside a {horizon}x{num_states} table")),
            },
            Self::Continuous { dim } => {
                let mut x = whitened_input(obs, dim, whitener)?;
                x.push(S::one());
                Ok(x.into_iter().enumerate().collect())
            }
        }
    }
}

/// Raw features with time appended, whitened when a whitener is given.
pub(crate) fn whitened_input<S: Scalar>(obs: &Observation<S>, dim: usize, whitener: Option<&Whitener<S>>) -> Result<Vec<S>> {
    let x = match obs.features_with_time() {
        Some(x) if x.len() == dim + 1 => x,
        _ => return invalid(format!("expected a {dim}-dimensional feature observation, got {obs:?}")),
    };
    match whitener {
        Some(w) => w.whiten(&x),
        None => Ok(x),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyShape {
    TabularSoftmax {
        horizon: usize,
        num_states: usize,
        num_actions: usize,
    },
    LinearSoftmax {
        features: FeatureMap,
        num_actions: usize,
    },
    GaussianMlp {
        obs_dim: usize,
        hidden: Vec<usize>,
        action_dim: usize,
    },
}

impl PolicyShape {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Self::TabularSoftmax { .. } => PolicyKind::TabularSoftmax,
            Self::LinearSoftmax { .. } => PolicyKind::LinearSoftmax,
            Self::GaussianMlp { .. } => PolicyKind::GaussianMlp,
        }
    }

    fn theta_len(&self) -> usize {
        match self {
            Self::TabularSoftmax {
                horizon,
                num_states,
                num_actions,
            } => horizon * num_states * num_actions,
            Self::LinearSoftmax { features, num_actions } => features.len() * num_actions,
            Self::GaussianMlp { .. } => nn::num_params(&self.layer_sizes()),
        }
    }

    fn log_std_len(&self) -> usize {
        match self {
            Self::GaussianMlp { action_dim, .. } => *action_dim,
            _ => 0,
        }
    }

    /// Dimension of the whitened input, when the kind whitens.
    fn whitened_dim(&self) -> Option<usize> {
        match self {
            Self::LinearSoftmax {
                features: FeatureMap::Continuous { dim },
                ..
            } => Some(dim + 1),
            Self::GaussianMlp { obs_dim, .. } => Some(obs_dim + 1),
            _ => None,
        }
    }

    fn layer_sizes(&self) -> Vec<usize> {
        match self {
            Self::GaussianMlp {
                obs_dim,
                hidden,
                action_dim,
            } => {
                let mut sizes = vec![obs_dim + 1];
                sizes.extend(hidden);
                sizes.push(*action_dim);
                sizes
            }
            _ => Vec::new(),
        }
    }
}

pub const DEFAULT_POLICY_HIDDEN: [usize; 2] = [128, 128];

/// Differentiable policy: structure plus a flat parameter vector.
///
/// The optimizable parameters are `theta` followed by `log_std`; score
/// vectors and updates use that concatenated layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<S> {
    shape: PolicyShape,
    theta: Vec<S>,
    log_std: Vec<S>,
    whitener: Option<Whitener<S>>,
}

impl<S: Scalar> PolicyParams<S> {
    pub fn new(shape: PolicyShape, theta: Vec<S>, log_std: Vec<S>, whitener: Option<Whitener<S>>) -> Result<Self> {
        if theta.len() != shape.theta_len() || log_std.len() != shape.log_std_len() {
            return invalid(format!(
                "parameter lengths ({}, {}) do not match shape {shape:?}",
                theta.len(),
                log_std.len()
            ));
        }
        if let Some(w) = &whitener {
            if Some(w.dim()) != shape.whitened_dim() {
                return invalid("whitener dimension does not match the policy input");
            }
        }
        if theta.iter().chain(&log_std).any(|v| !v.is_finite()) {
            return invalid("policy parameters must be finite");
        }
        if let PolicyShape::GaussianMlp { hidden, .. } = &shape {
            if hidden.contains(&0) {
                return invalid("hidden layers must be nonempty");
            }
        }
        Ok(Self {
            shape,
            theta,
            log_std,
            whitener,
        })
    }

    /// Zero logits, i.e. the uniform policy.
    pub fn tabular_softmax(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let shape = PolicyShape::TabularSoftmax {
            horizon,
            num_states,
            num_actions,
        };
        Self {
            theta: vec![S::zero(); shape.theta_len()],
            shape,
            log_std: Vec::new(),
            whitener: None,
        }
    }

    pub fn linear_softmax(features: FeatureMap, num_actions: usize) -> Self {
        let shape = PolicyShape::LinearSoftmax { features, num_actions };
        Self {
            theta: vec![S::zero(); shape.theta_len()],
            whitener: shape.whitened_dim().map(Whitener::new),
            shape,
            log_std: Vec::new(),
        }
    }

    /// Gaussian policy whose mean is a tanh MLP of the whitened observation
    /// (time appended); the output layer starts near zero.
    pub fn gaussian_mlp(obs_dim: usize, hidden: &[usize], action_dim: usize, init_log_std: S, seed: u64) -> Result<Self> {
        let shape = PolicyShape::GaussianMlp {
            obs_dim,
            hidden: hidden.to_vec(),
            action_dim,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = nn::init(&shape.layer_sizes(), &mut rng, 0.01);
        let whitener = shape.whitened_dim().map(Whitener::new);
        Self::new(shape, theta, vec![init_log_std; action_dim], whitener)
    }

    pub fn kind(&self) -> PolicyKind {
        self.shape.kind()
    }

    pub fn shape(&self) -> &PolicyShape {
        &self.shape
    }

    pub fn theta(&self) -> &[S] {
        &self.theta
    }

    pub fn log_std(&self) -> &[S] {
        &self.log_std
    }

    pub fn whitener(&self) -> Option<&Whitener<S>> {
        self.whitener.as_ref()
    }

    pub fn num_params(&self) -> usize {
        self.theta.len() + self.log_std.len()
    }

    pub fn params(&self) -> Vec<S> {
        let mut p = self.theta.clone();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn with_params(&self, flat: &[S]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return invalid(format!("expected {} parameters, got {}", self.num_params(), flat.len()));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(MambaError::RejectedStep("non-finite policy parameters".into()));
        }
        let (theta, log_std) = flat.split_at(self.theta.len());
        Ok(Self {
            theta: theta.to_vec(),
            log_std: log_std.to_vec(),
            ..self.clone()
        })
    }

    pub fn with_whitener(&self, whitener: Option<Whitener<S>>) -> Result<Self> {
        Self::new(self.shape.clone(), self.theta.clone(), self.log_std.clone(), whitener)
    }

    fn num_actions(&self) -> usize {
        match &self.shape {
            PolicyShape::TabularSoftmax { num_actions, .. } | PolicyShape::LinearSoftmax { num_actions, .. } => {
                *num_actions
            }
            PolicyShape::GaussianMlp { action_dim, .. } => *action_dim,
        }
    }

    fn whitened_input(&self, obs: &Observation<S>, dim: usize) -> Result<Vec<S>> {
        whitened_input(obs, dim, self.whitener.as_ref())
    }

    fn linear_features(&self, features: &FeatureMap, obs: &Observation<S>) -> Result<Vec<(usize, S)>> {
        features.features(obs, self.whitener.as_ref())
    }

    /// Logits of a discrete kind.
    fn logits(&self, obs: &Observation<S>) -> Result<Vec<S>> {
        match &self.shape {
            PolicyShape::TabularSoftmax {
                horizon,
                num_states,
                num_actions,
            } => match obs.index() {
                Some(s) if s < *num_states && obs.t < *horizon => {
                    let base = (obs.t * num_states + s) * num_actions;
                    Ok(self.theta[base..base + num_actions].to_vec())
                }
                _ => invalid(format!("observation {obs:?} outside a {horizon}x{num_states} table")),
            },
            PolicyShape::LinearSoftmax { features, num_actions } => {
                let phi = self.linear_features(features, obs)?;
                let width = features.len();
                Ok((0..*num_actions)
                    .map(|a| phi.iter().map(|&(i, v)| self.theta[a * width + i] * v).sum())
                    .collect())
            }
            PolicyShape::GaussianMlp { .. } => invalid("Gaussian policies have no logits"),
        }
    }

    pub fn action_distribution(&self, obs: &Observation<S>) -> Result<ActionDistribution<S>> {
        match &self.shape {
            PolicyShape::GaussianMlp { obs_dim, .. } => {
                let x = self.whitened_input(obs, *obs_dim)?;
                let acts = nn::forward(&self.shape.layer_sizes(), &self.theta, &x);
                let mean = acts.last().cloned().unwrap_or_default();
                let std = self.log_std.iter().map(|l| l.exp()).collect();
                Ok(ActionDistribution::Gaussian { mean, std })
            }
            _ => Ok(ActionDistribution::Categorical(softmax(&self.logits(obs)?))),
        }
    }

    pub fn log_prob(&self, obs: &Observation<S>, action: &Action<S>) -> Result<S> {
        self.action_distribution(obs)?.log_prob(action)
    }

    /// Score function: gradient of `log pi(action | obs)` in the flat layout.
    pub fn logprob_gradient(&self, obs: &Observation<S>, action: &Action<S>) -> Result<Vec<S>> {
        let mut grad = vec![S::zero(); self.num_params()];
        match &self.shape {
            PolicyShape::TabularSoftmax {
                num_states, num_actions, ..
            } => {
                let a = self.discrete_action(action)?;
                let probs = softmax(&self.logits(obs)?);
                let s = obs.index().unwrap_or(0);
                let base = (obs.t * num_states + s) * num_actions;
                for (b, &p) in probs.iter().enumerate() {
                    grad[base + b] = indicator::<S>(a == b) - p;
                }
            }
            PolicyShape::LinearSoftmax { features, .. } => {
                let a = self.discrete_action(action)?;
                let phi = self.linear_features(features, obs)?;
                let probs = softmax(&self.logits(obs)?);
                let width = features.len();
                for (b, &p) in probs.iter().enumerate() {
                    let coef = indicator::<S>(a == b) - p;
                    for &(i, v) in &phi {
                        grad[b * width + i] = coef * v;
                    }
                }
            }
            PolicyShape::GaussianMlp { obs_dim, action_dim, .. } => {
                let x_act = match action {
                    Action::Continuous(v) if v.len() == *action_dim => v,
                    other => return invalid(format!("expected a {action_dim}-dimensional action, got {other:?}")),
                };
                let sizes = self.shape.layer_sizes();
                let x = self.whitened_input(obs, *obs_dim)?;
                let acts = nn::forward(&sizes, &self.theta, &x);
                let mean = acts.last().cloned().unwrap_or_default();
                let mut grad_mean = Vec::with_capacity(*action_dim);
                let n_theta = self.theta.len();
                for j in 0..*action_dim {
                    let var = (S::lit(2.0) * self.log_std[j]).exp();
                    if !(var > S::zero()) || !var.is_finite() {
                        return Err(MambaError::NumericDomain("degenerate Gaussian scale".into()));
                    }
                    let diff = x_act[j] - mean[j];
                    grad_mean.push(diff / var);
                    grad[n_theta + j] = diff * diff / var - S::one();
                }
                nn::backward(&sizes, &self.theta, &acts, &grad_mean, &mut grad[..n_theta]);
            }
        }
        Ok(grad)
    }

    fn discrete_action(&self, action: &Action<S>) -> Result<usize> {
        match action {
            Action::Discrete(a) if *a < self.num_actions() => Ok(*a),
            other => invalid(format!("invalid discrete action {other:?}")),
        }
    }

    pub fn sample(&self, obs: &Observation<S>, rng: &mut dyn rand::RngCore) -> Result<Action<S>> {
        Ok(self.action_distribution(obs)?.sample(rng))
    }

    /// The `(t, s) -> pi(. | t, s)` table of a discrete policy over index
    /// observations.
    pub fn tabulate(&self, horizon: usize, num_states: usize) -> Result<TabularPolicy<S>> {
        if self.kind() == PolicyKind::GaussianMlp
            || matches!(
                self.shape,
                PolicyShape::LinearSoftmax {
                    features: FeatureMap::Continuous { .. },
                    ..
                }
            )
        {
            return invalid("only index-observation softmax policies have an exact table");
        }
        let mut probs = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mut block = Vec::with_capacity(num_states);
            for s in 0..num_states {
                block.push(softmax(&self.logits(&Observation::tabular(t, s))?));
            }
            probs.push(block);
        }
        TabularPolicy::new(probs)
    }

    /// Folds a batch of observations into the whitening statistics; kinds
    /// that read state indices are returned unchanged.
    pub fn update_whitening(&self, batch: &[Observation<S>]) -> Result<Self> {
        let (Some(w), Some(dim)) = (&self.whitener, self.shape.whitened_dim()) else {
            return Ok(self.clone());
        };
        let inputs = batch
            .iter()
            .map(|o| match o.features_with_time() {
                Some(x) if x.len() == dim => Ok(x),
                _ => invalid(format!("observation {o:?} has the wrong feature dimension")),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            whitener: Some(w.update(&inputs)?),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn indicator<S: Scalar>(b: bool) -> S {
    if b {
        S::one()
    } else {
        S::zero()
    }
}

pub(crate) fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let top = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&l| (l - top).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct PolicyDocument<S> {
    kind: PolicyKind,
    shape: PolicyShape,
    theta: Vec<S>,
    log_std: Vec<S>,
    whitener: Option<Whitener<S>>,
}

impl<S: Scalar> Serialize for PolicyParams<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> std::result::Result<Z::Ok, Z::Error> {
        PolicyDocument {
            kind: self.kind(),
            shape: self.shape.clone(),
            theta: self.theta.clone(),
            log_std: self.log_std.clone(),
            whitener: self.whitener.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for PolicyParams<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let doc = PolicyDocument::<S>::deserialize(deserializer)?;
        if doc.kind != doc.shape.kind() {
            return Err(D::Error::custom("policy kind does not match its shape"));
        }
        PolicyParams::new(doc.shape, doc.theta, doc.log_std, doc.whitener).map_err(D::Error::custom)
    }
}
