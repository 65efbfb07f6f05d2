use serde::{Deserialize, Serialize};

use crate::dp::tables::ValueTable;
use crate::env::Observation;
use crate::error::{invalid, MambaError, Result};
use crate::policy::PolicyParams;
use crate::rollout::Trajectory;
use crate::scalar::{axpy, norm2, Scalar};
use crate::value::{fhat_max, ValueModel};

/// A value estimate `f̂(t, s)` used as the advantage baseline.
pub trait Baseline<S: Scalar>: Sync {
    fn value(&self, obs: &Observation<S>) -> Result<S>;
}

impl<S: Scalar> Baseline<S> for ValueTable<S> {
    fn value(&self, obs: &Observation<S>) -> Result<S> {
        if obs.t >= self.horizon() {
            return Ok(S::zero());
        }
        match obs.index() {
            Some(s) if s < self.num_states() => Ok(self.get(obs.t, s)),
            _ => invalid(format!("observation {obs:?} outside the value table")),
        }
    }
}

impl<S: Scalar> Baseline<S> for ValueModel<S> {
    fn value(&self, obs: &Observation<S>) -> Result<S> {
        self.predict(obs)
    }
}

/// `max_k V̂^k` over a set of oracle value models.
pub struct MaxBaseline<'a, S>(pub &'a [ValueModel<S>]);

impl<S: Scalar> Baseline<S> for MaxBaseline<'_, S> {
    fn value(&self, obs: &Observation<S>) -> Result<S> {
        fhat_max(self.0, obs)
    }
}

/// Sampled loss gradient plus spread diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GradientEstimate<S> {
    /// Mean over trajectories; estimates the gradient of the online loss.
    pub vector: Vec<S>,
    pub num_trajectories: usize,
    /// Per-coordinate mean squared deviation of the per-trajectory terms.
    pub coordinate_variance: Vec<S>,
    pub variance_trace: S,
    pub bias_norm: Option<S>,
    /// Per-trajectory score sums `Σ_t ∇log π(a_t|s_t)`.
    #[serde(skip)]
    pub scores: Vec<Vec<S>>,
}

impl<S: Scalar> GradientEstimate<S> {
    /// Standard error of the mean, per coordinate.
    pub fn standard_errors(&self) -> Vec<S> {
        let n = S::from_usize_lossy(self.num_trajectories.saturating_sub(1).max(1));
        self.coordinate_variance.iter().map(|v| (*v / n).sqrt()).collect()
    }

    pub fn norm(&self) -> S {
        norm2(&self.vector)
    }
}

/// `‖loss_gradient + ascent‖`: distance between a sampled loss gradient and
/// the negated exact ascent direction.
pub(crate) fn bias_from<S: Scalar>(loss_gradient: &[S], ascent: &[S]) -> S {
    let diff: Vec<S> = loss_gradient.iter().zip(ascent).map(|(g, a)| *g + *a).collect();
    norm2(&diff)
}

/// TD residuals `r_t + f̂(s_{t+1}) - f̂(s_t)`, with `f̂ = 0` after the last
/// step of a finished episode.
pub fn td_residuals<S: Scalar>(traj: &Trajectory<S>, fhat: &dyn Baseline<S>) -> Result<Vec<S>> {
    traj.steps
        .iter()
        .map(|step| {
            let next = if step.done { S::zero() } else { fhat.value(&step.next)? };
            Ok(step.reward + next - fhat.value(&step.obs)?)
        })
        .collect()
}

/// `Â_λ(t) = δ_t + λ Â_λ(t+1)` run backwards from the end of the trajectory.
pub fn lambda_advantages_on_trajectory<S: Scalar>(
    traj: &Trajectory<S>,
    fhat: &dyn Baseline<S>,
    lambda: S,
) -> Result<Vec<S>> {
    crate::dp::lambda::check_lambda(lambda)?;
    let mut adv = td_residuals(traj, fhat)?;
    let mut acc = S::zero();
    for a in adv.iter_mut().rev() {
        acc = *a + lambda * acc;
        *a = acc;
    }
    Ok(adv)
}

/// Running mean and mean squared deviation of per-trajectory vectors.
struct Welford<S> {
    n: usize,
    mean: Vec<S>,
    m2: Vec<S>,
}

impl<S: Scalar> Welford<S> {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![S::zero(); dim],
            m2: vec![S::zero(); dim],
        }
    }

    fn push(&mut self, x: &[S]) {
        self.n += 1;
        let n = S::from_usize_lossy(self.n);
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    fn finish(self, scores: Vec<Vec<S>>) -> GradientEstimate<S> {
        let n = S::from_usize_lossy(self.n.max(1));
        let coordinate_variance: Vec<S> = self.m2.iter().map(|v| *v / n).collect();
        GradientEstimate {
            vector: self.mean,
            num_trajectories: self.n,
            variance_trace: coordinate_variance.iter().copied().sum(),
            coordinate_variance,
            bias_norm: None,
            scores,
        }
    }
}

/// Estimator of the λ-weighted online-loss gradient from trajectories drawn
/// by `behavior`. Per trajectory:
/// `-Σ_t ∇log π(a_t|s_t) ρ_t Â_λ(t)`, `ρ_t = π(a_t|s_t) / μ(a_t|s_t)`,
/// then averaged. Summing over `t` already carries the horizon factor.
pub fn mamba_gradient<S: Scalar>(
    trajectories: &[Trajectory<S>],
    current: &PolicyParams<S>,
    behavior: &PolicyParams<S>,
    fhat: &dyn Baseline<S>,
    lambda: S,
) -> Result<GradientEstimate<S>> {
    weighted_score_gradient(trajectories, current, Some(behavior), |traj| {
        lambda_advantages_on_trajectory(traj, fhat, lambda)
    })
}

/// Policy gradient with generalized advantage estimation: the same
/// mechanics with `f̂` fit to the learner's own returns.
pub fn pg_gae_gradient<S: Scalar>(
    trajectories: &[Trajectory<S>],
    current: &PolicyParams<S>,
    behavior: &PolicyParams<S>,
    value: &dyn Baseline<S>,
    lambda: S,
) -> Result<GradientEstimate<S>> {
    mamba_gradient(trajectories, current, behavior, value, lambda)
}

/// One-step advantage estimator against a fixed baseline, written out
/// directly: `-Σ_t ∇log π(a_t|s_t) (r_t + f̂(s_{t+1}) - f̂(s_t))`.
pub fn aggrevate_gradient<S: Scalar>(
    trajectories: &[Trajectory<S>],
    policy: &PolicyParams<S>,
    fhat: &dyn Baseline<S>,
) -> Result<GradientEstimate<S>> {
    let mut acc = Welford::new(policy.num_params());
    for traj in trajectories {
        let mut g = vec![S::zero(); policy.num_params()];
        for step in &traj.steps {
            let next = if step.done { S::zero() } else { fhat.value(&step.next)? };
            let adv = step.reward + next - fhat.value(&step.obs)?;
            axpy(-adv, &policy.logprob_gradient(&step.obs, &step.action)?, &mut g);
        }
        acc.push(&g);
    }
    Ok(acc.finish(Vec::new()))
}

fn weighted_score_gradient<S: Scalar>(
    trajectories: &[Trajectory<S>],
    current: &PolicyParams<S>,
    behavior: Option<&PolicyParams<S>>,
    advantages: impl Fn(&Trajectory<S>) -> Result<Vec<S>>,
) -> Result<GradientEstimate<S>> {
    if trajectories.is_empty() {
        return invalid("gradient estimate needs at least one trajectory");
    }
    let dim = current.num_params();
    let mut acc = Welford::new(dim);
    let mut scores = Vec::with_capacity(trajectories.len());
    for traj in trajectories {
        let adv = advantages(traj)?;
        let mut g = vec![S::zero(); dim];
        let mut score = vec![S::zero(); dim];
        for (step, &a) in traj.steps.iter().zip(&adv) {
            let grad_log = current.logprob_gradient(&step.obs, &step.action)?;
            let rho = match behavior {
                Some(mu) => {
                    let lb = mu.log_prob(&step.obs, &step.action)?;
                    if !lb.is_finite() {
                        return Err(MambaError::NumericDomain(format!(
                            "behavior policy gives probability 0 to the action taken at t = {}",
                            step.t
                        )));
                    }
                    (current.log_prob(&step.obs, &step.action)? - lb).exp()
                }
                None => S::one(),
            };
            axpy(-rho * a, &grad_log, &mut g);
            axpy(S::one(), &grad_log, &mut score);
        }
        acc.push(&g);
        scores.push(score);
    }
    Ok(acc.finish(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, Observation};
    use crate::rollout::Step;

    struct Zero;
    impl Baseline<f64> for Zero {
        fn value(&self, _: &Observation<f64>) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn traj(rewards: &[f64]) -> Trajectory<f64> {
        let n = rewards.len();
        Trajectory::new(
            rewards
                .iter()
                .enumerate()
                .map(|(t, &r)| Step {
                    t,
                    obs: Observation::tabular(t, 0),
                    action: Action::Discrete(0),
                    reward: r,
                    next: Observation::tabular(t + 1, 0),
                    done: t + 1 == n,
                })
                .collect(),
        )
    }

    #[test]
    fn hand_run_recursion() {
        let adv = lambda_advantages_on_trajectory(&traj(&[1.0, 0.0, 1.0]), &Zero, 0.5).unwrap();
        assert_eq!(adv, vec![1.25, 0.5, 1.0]);
    }

    #[test]
    fn lambda_one_zero_baseline_is_return_to_go() {
        let adv = lambda_advantages_on_trajectory(&traj(&[1.0, 2.0, 3.0]), &Zero, 1.0).unwrap();
        assert_eq!(adv, vec![6.0, 5.0, 3.0]);
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let f = ValueTable::from_rows(vec![vec![0.5]; 3]).unwrap();
        let t = traj(&[1.0, 0.0, 1.0]);
        assert_eq!(
            lambda_advantages_on_trajectory(&t, &f, 0.0).unwrap(),
            td_residuals(&t, &f).unwrap()
        );
    }

    #[test]
    fn zero_probability_behavior_is_a_domain_error() {
        let pi = PolicyParams::<f64>::tabular_softmax(3, 1, 2);
        let mut theta = vec![0.0; pi.num_params()];
        theta[1] = -1e6;
        let mu = pi.with_params(&theta).unwrap();
        // mu puts ~0 mass on action 1
        let mut t = traj(&[1.0]);
        t.steps[0].action = Action::Discrete(1);
        let err = mamba_gradient(&[t], &pi, &mu, &Zero, 0.5);
        assert!(matches!(err, Err(MambaError::NumericDomain(_))));
    }

    #[test]
    fn matched_policies_skip_ratio_effects() {
        let pi = PolicyParams::<f64>::tabular_softmax(3, 1, 2);
        let t = traj(&[1.0, 0.0, 1.0]);
        let g = mamba_gradient(&[t.clone()], &pi, &pi, &Zero, 0.0).unwrap();
        let a = aggrevate_gradient(&[t], &pi, &Zero).unwrap();
        assert_eq!(g.vector, a.vector);
        assert_eq!(g.variance_trace, 0.0);
    }
}
