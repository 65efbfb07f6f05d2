//! MDP data model, the learner-facing environment interface and the
//! environment constructors.

pub mod cartpole;
pub mod gridworld;
pub mod mdp;
pub mod trees;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cartpole::{make_cartpole, CartPole};
pub use gridworld::{make_gridworld, GridWorld};
pub use mdp::{make_random_mdp, TabularMdp};
pub use trees::{make_ordering_tree, make_switching_tree, OrderingVariant, TreeInstance};

use crate::error::{MambaError, Result};
use crate::scalar::Scalar;

/// What a learner sees of a state: the time index plus either a base-state
/// index (tabular environments) or a feature vector (continuous ones).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Observation<S> {
    pub t: usize,
    pub state: StateObs<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", rename_all = "snake_case")]
pub enum StateObs<S> {
    Index(usize),
    Features(Vec<S>),
}

impl<S: Scalar> Observation<S> {
    pub fn tabular(t: usize, s: usize) -> Self {
        Self { t, state: StateObs::Index(s) }
    }

    pub fn continuous(t: usize, features: Vec<S>) -> Self {
        Self {
            t,
            state: StateObs::Features(features),
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self.state {
            StateObs::Index(s) => Some(s),
            StateObs::Features(_) => None,
        }
    }

    pub fn features(&self) -> Option<&[S]> {
        match &self.state {
            StateObs::Features(x) => Some(x),
            StateObs::Index(_) => None,
        }
    }

    /// Raw features with the time index appended as the last coordinate.
    pub fn features_with_time(&self) -> Option<Vec<S>> {
        self.features().map(|x| {
            let mut v = x.to_vec();
            v.push(S::from_usize_lossy(self.t));
            v
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", rename_all = "snake_case")]
pub enum Action<S> {
    Discrete(usize),
    Continuous(Vec<S>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub reward: S,
    pub next: Observation<S>,
    /// Episode over, either by reaching the horizon or by termination.
    pub done: bool,
}

/// Learner-facing environment handle. Dynamics and rewards stay hidden;
/// only observations and sampled rewards come out.
pub trait Environment<S: Scalar>: Send + Sync {
    fn horizon(&self) -> usize;

    fn action_space(&self) -> ActionSpace;

    /// Number of base states when observations are state indices.
    fn num_states(&self) -> Option<usize> {
        None
    }

    fn reset(&mut self) -> Observation<S>;

    fn step(&mut self, action: &Action<S>) -> Result<StepOutcome<S>>;

    /// Fresh handle over the same environment with its own random stream.
    fn fork(&self, seed: u64) -> Box<dyn Environment<S>>;
}

/// Draws an index from a probability vector.
pub(crate) fn sample_index<S: Scalar, R: Rng + ?Sized>(probs: &[S], rng: &mut R) -> usize {
    let u = S::lit(rng.gen::<f64>());
    let mut acc = S::zero();
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > S::zero() {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Simulator over a [`TabularMdp`].
pub struct TabularEnv<S> {
    mdp: Arc<TabularMdp<S>>,
    rng: ChaCha8Rng,
    t: usize,
    s: usize,
    live: bool,
}

impl<S: Scalar> TabularEnv<S> {
    pub fn new(mdp: Arc<TabularMdp<S>>, seed: u64) -> Self {
        Self {
            mdp,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
            s: 0,
            live: false,
        }
    }
}

impl<S: Scalar> Environment<S> for TabularEnv<S> {
    fn horizon(&self) -> usize {
        self.mdp.horizon()
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(self.mdp.num_actions())
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.mdp.num_base_states())
    }

    fn reset(&mut self) -> Observation<S> {
        self.t = 0;
        self.s = sample_index(self.mdp.init_dist(), &mut self.rng);
        self.live = true;
        Observation::tabular(0, self.s)
    }

    fn step(&mut self, action: &Action<S>) -> Result<StepOutcome<S>> {
        if !self.live {
            return Err(MambaError::Environment("step called on a finished episode".into()));
        }
        let a = match action {
            Action::Discrete(a) if *a < self.mdp.num_actions() => *a,
            other => {
                return Err(MambaError::Environment(format!("invalid tabular action {other:?}")));
            }
        };
        let reward = self.mdp.reward(self.t, self.s, a);
        let next = sample_index(self.mdp.transition(self.t, self.s, a), &mut self.rng);
        self.t += 1;
        self.s = next;
        let done = self.t == self.mdp.horizon();
        self.live = !done;
        Ok(StepOutcome {
            reward,
            next: Observation::tabular(self.t, next),
            done,
        })
    }

    fn fork(&self, seed: u64) -> Box<dyn Environment<S>> {
        Box::new(TabularEnv::new(Arc::clone(&self.mdp), seed))
    }
}
