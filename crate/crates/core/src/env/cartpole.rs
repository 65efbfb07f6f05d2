//! Cart-pole balancing with a continuous force action, integrated with
//! explicit Euler steps.

use std::marker::PhantomData;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, ActionSpace, Environment, Observation, StepOutcome};
use crate::error::{MambaError, Result};
use crate::scalar::Scalar;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const MAX_FORCE: f64 = 10.0;
pub const DT: f64 = 0.02;
pub const X_LIMIT: f64 = 2.4;
pub const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const HORIZON: usize = 500;
const RESET_NOISE: f64 = 0.05;

/// State `(x, x_dot, theta, theta_dot)`.
pub type CartState = [f64; 4];

pub fn cartpole_dynamics(state: CartState, action: f64) -> CartState {
    let [x, x_dot, theta, theta_dot] = state;
    let force = MAX_FORCE * action.clamp(-1.0, 1.0);
    let total_mass = CART_MASS + POLE_MASS;
    let pole_moment = POLE_MASS * HALF_LENGTH;
    let (sin, cos) = theta.sin_cos();
    let temp = (force + pole_moment * theta_dot * theta_dot * sin) / total_mass;
    let theta_acc =
        (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - pole_moment * theta_acc * cos / total_mass;
    [
        x + DT * x_dot,
        x_dot + DT * x_acc,
        theta + DT * theta_dot,
        theta_dot + DT * theta_acc,
    ]
}

pub fn is_terminal(state: &CartState) -> bool {
    state[0].abs() > X_LIMIT || state[2].abs() > THETA_LIMIT
}

pub struct CartPole<S> {
    rng: ChaCha8Rng,
    seed: u64,
    fixed_start: Option<CartState>,
    state: CartState,
    t: usize,
    live: bool,
    _scalar: PhantomData<S>,
}

impl<S: Scalar> CartPole<S> {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            fixed_start: None,
            state: [0.0; 4],
            t: 0,
            live: false,
            _scalar: PhantomData,
        }
    }

    /// Every reset starts from `start` instead of a noisy upright state.
    pub fn with_start(mut self, start: CartState) -> Self {
        self.fixed_start = Some(start);
        self
    }

    pub fn state(&self) -> CartState {
        self.state
    }

    fn observe(&self) -> Observation<S> {
        Observation::continuous(self.t, self.state.iter().map(|&v| S::lit(v)).collect())
    }
}

pub fn make_cartpole<S: Scalar>() -> CartPole<S> {
    CartPole::with_seed(0)
}

impl<S: Scalar> Environment<S> for CartPole<S> {
    fn horizon(&self) -> usize {
        HORIZON
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(1)
    }

    fn reset(&mut self) -> Observation<S> {
        self.state = match self.fixed_start {
            Some(s) => s,
            None => std::array::from_fn(|_| self.rng.gen_range(-RESET_NOISE..RESET_NOISE)),
        };
        self.t = 0;
        self.live = true;
        self.observe()
    }

    fn step(&mut self, action: &Action<S>) -> Result<StepOutcome<S>> {
        if !self.live {
            return Err(MambaError::Environment("step called on a finished episode".into()));
        }
        let u = match action {
            Action::Continuous(v) if v.len() == 1 && v[0].is_finite() => v[0].to_f64_lossy(),
            other => {
                return Err(MambaError::Environment(format!("invalid cart-pole action {other:?}")));
            }
        };
        self.state = cartpole_dynamics(self.state, u);
        self.t += 1;
        let done = is_terminal(&self.state) || self.t == HORIZON;
        self.live = !done;
        Ok(StepOutcome {
            reward: S::one(),
            next: self.observe(),
            done,
        })
    }

    fn fork(&self, seed: u64) -> Box<dyn Environment<S>> {
        let mut env = CartPole::with_seed(seed ^ self.seed.rotate_left(17));
        env.fixed_start = self.fixed_start;
        Box::new(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(env: &mut CartPole<f64>, force: f64) -> (usize, f64, bool) {
        env.reset();
        let mut total = 0.0;
        for k in 0..HORIZON {
            let out = env.step(&Action::Continuous(vec![force])).unwrap();
            total += out.reward;
            if out.done {
                return (k + 1, total, is_terminal(&env.state()));
            }
        }
        unreachable!()
    }

    #[test]
    fn balanced_start_survives_without_force() {
        let mut env = CartPole::<f64>::with_seed(1).with_start([0.0; 4]);
        let (len, total, _) = run(&mut env, 0.0);
        assert!(len >= 50);
        assert_eq!(total, len as f64);
    }

    #[test]
    fn done_exactly_when_angle_leaves_the_band() {
        let mut env = CartPole::<f64>::with_seed(1).with_start([0.0, 0.0, 0.01, 0.0]);
        env.reset();
        let mut prev = env.state();
        loop {
            let out = env.step(&Action::Continuous(vec![0.0])).unwrap();
            let now = env.state();
            assert!(!is_terminal(&prev));
            if out.done {
                assert!(now[2].abs() > THETA_LIMIT);
                break;
            }
            assert!(now[2].abs() <= THETA_LIMIT);
            prev = now;
        }
    }

    #[test]
    fn pushing_hard_fails_early_and_rewards_are_unit() {
        let mut env = make_cartpole::<f64>();
        let (len, total, terminal) = run(&mut env, 1.0);
        assert!(len < HORIZON);
        assert!(terminal);
        assert_eq!(total, len as f64);
    }

    #[test]
    fn forks_are_deterministic() {
        let env = make_cartpole::<f64>();
        let mut a = env.fork(9);
        let mut b = env.fork(9);
        assert_eq!(a.reset(), b.reset());
    }

    #[test]
    fn rejects_bad_actions() {
        let mut env = make_cartpole::<f64>();
        env.reset();
        assert!(env.step(&Action::Discrete(0)).is_err());
        assert!(env.step(&Action::Continuous(vec![f64::NAN])).is_err());
    }
}
