use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dp::gradient::{exact_gradient, exact_policy_gradient};
use crate::dp::loss::online_loss_exact;
use crate::dp::policies::max_aggregation_policy;
use crate::dp::tables::{TabularPolicy, ValueTable};
use crate::dp::values::{fmax_baseline, policy_value};
use crate::env::{Environment, Observation, TabularMdp};
use crate::error::{invalid, Result};
use crate::learner::config::{Estimator, LearnerConfig, SwitchKind, PG_GAE_BUFFER_WINDOW};
use crate::learner::estimators::{bias_from, mamba_gradient, pg_gae_gradient, GradientEstimate, MaxBaseline};
use crate::optim::OptimizerState;
use crate::policy::{behavior_clone, Oracle, Policy, PolicyParams};
use crate::rollout::{collect_seeded, derive_seed, rollout_full, rollout_riro, SwitchTimeSampler, Trajectory};
use crate::scalar::Scalar;
use crate::value::{mc_targets, monte_carlo_regression, ReplayBuffer, ValueKind, ValueModel};

/// Exact model of a tabular environment, used only for diagnostics.
#[derive(Debug, Clone)]
pub struct ExactContext<S> {
    pub mdp: TabularMdp<S>,
    pub oracles: Vec<TabularPolicy<S>>,
    /// Replace the learned oracle value models by the exact oracle values
    /// and skip regression.
    pub inject_values: bool,
}

impl<S: Scalar> ExactContext<S> {
    /// `f^max` over the first `k` oracles.
    pub fn fmax(&self, k: usize) -> Result<ValueTable<S>> {
        if k == 0 || k > self.oracles.len() {
            return invalid(format!("need between 1 and {} oracles, got {k}", self.oracles.len()));
        }
        let values = self.oracles[..k]
            .iter()
            .map(|pi| policy_value(&self.mdp, pi))
            .collect::<Result<Vec<_>>>()?;
        fmax_baseline(&values)
    }
}

/// One line of the run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iter: usize,
    pub mean_eval_return: f64,
    pub best_return: f64,
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_trace: Option<f64>,
    /// Exact `-ℓ_n(π^max; λ)` under the roll-in of `π_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_check: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord<S> {
    pub rows: Vec<IterationRow>,
    pub best_policy: PolicyParams<S>,
    pub final_policy: PolicyParams<S>,
    pub value_models: Vec<ValueModel<S>>,
}

impl<S: Scalar> RunRecord<S> {
    pub fn to_jsonl(&self) -> Result<String> {
        rows_to_jsonl(&self.rows)
    }

    /// First iteration whose best return reaches `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.best_return >= threshold).map(|r| r.iter)
    }

    pub fn final_best_return(&self) -> f64 {
        self.rows.last().map_or(f64::NEG_INFINITY, |r| r.best_return)
    }
}

pub fn rows_to_jsonl(rows: &[IterationRow]) -> Result<String> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn rows_from_jsonl(text: &str) -> Result<Vec<IterationRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

// rng stream tags within an iteration
const EVAL: u64 = 0;
const LEARNER: u64 = 1;
const RIRO: u64 = 2;
const CLONE: u64 = 3;
const PRETRAIN: u64 = 64;
const VALUE: u64 = 512;

fn stream(iteration: usize, tag: u64) -> u64 {
    ((iteration as u64) << 20) | tag
}

fn initial_value_model<S: Scalar>(env: &dyn Environment<S>, config: &LearnerConfig) -> Result<ValueModel<S>> {
    let horizon = env.horizon();
    let num_states = env.num_states();
    let obs_dim = env.fork(0).reset().features().map(<[S]>::len);
    let kind = config.value_model.kind.unwrap_or(if num_states.is_some() {
        ValueKind::TabularAverage
    } else {
        ValueKind::Mlp
    });
    match (kind, num_states, obs_dim) {
        (ValueKind::TabularAverage, Some(n), _) => Ok(ValueModel::tabular(horizon, n)),
        (ValueKind::Linear, Some(n), _) => Ok(ValueModel::linear(
            horizon,
            crate::policy::FeatureMap::OneHotTimeState {
                horizon,
                num_states: n,
            },
        )),
        (ValueKind::Linear, None, Some(d)) => Ok(ValueModel::linear(horizon, crate::policy::FeatureMap::Continuous { dim: d })),
        (ValueKind::Mlp, _, Some(d)) => {
            ValueModel::mlp(horizon, d, &config.value_model.hidden, derive_seed(config.seed, stream(0, VALUE - 1)))
        }
        (kind, _, _) => invalid(format!("value model {kind:?} does not fit this environment's observations")),
    }
}

fn fit_all<S: Scalar>(
    models: &mut [ValueModel<S>],
    buffers: &[ReplayBuffer<S>],
    config: &LearnerConfig,
    iteration: usize,
) -> Result<()> {
    for (k, (model, buffer)) in models.iter_mut().zip(buffers).enumerate() {
        if !buffer.is_empty() {
            let seed = derive_seed(config.seed, stream(iteration, VALUE + k as u64));
            *model = monte_carlo_regression(model, buffer, &config.value_fit, seed)?;
        }
    }
    Ok(())
}

fn full_rollouts<S: Scalar>(
    env: &dyn Environment<S>,
    policy: &dyn Policy<S>,
    count: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<Trajectory<S>>> {
    collect_seeded(count, seed, workers, |_, rng| {
        let mut e = env.fork(rng.next_u64());
        rollout_full(e.as_mut(), policy, rng)
    })
}

fn observations<S: Scalar>(trajs: &[Trajectory<S>]) -> Vec<Observation<S>> {
    trajs.iter().flat_map(|t| t.steps.iter().map(|s| s.obs.clone())).collect()
}

/// Runs the learner for `config.iterations` rounds and returns the
/// per-iteration record together with the best policy found by evaluation.
///
/// In `mamba` mode every iteration draws `H/2` learner rollouts for the
/// gradient and `H/2` roll-in/roll-out rollouts whose oracle segments feed
/// the value buffers; `pg-gae` mode ignores the oracles and fits a single
/// value function to the learner's own returns after each step. `exact`
/// enables the bias and `-ℓ_n(π^max)` diagnostics on tabular environments.
pub fn train_mamba<S: Scalar>(
    env: &dyn Environment<S>,
    oracles: &[Oracle<S>],
    init_policy: &PolicyParams<S>,
    config: &LearnerConfig,
    exact: Option<&ExactContext<S>>,
) -> Result<RunRecord<S>> {
    config.validate()?;
    let mamba = config.estimator == Estimator::Mamba;
    let k_used = if mamba { config.num_oracles } else { 0 };
    if mamba && oracles.is_empty() {
        return invalid("oracle list is empty");
    }
    if k_used > oracles.len() {
        return invalid(format!("K = {k_used} but only {} oracles given", oracles.len()));
    }
    let oracles = &oracles[..k_used];
    let horizon = env.horizon();
    let lambda = S::lit(config.lambda);
    let (seed, workers) = (config.seed, config.workers);

    let exact_targets = match exact {
        Some(ctx) => {
            let k = if mamba { k_used } else { ctx.oracles.len() };
            let fmax = ctx.fmax(k)?;
            let pi_max = max_aggregation_policy(&ctx.mdp, &fmax)?;
            Some((ctx, fmax, pi_max))
        }
        None => None,
    };

    let proto = initial_value_model(env, config)?;
    let injected = mamba && exact.is_some_and(|c| c.inject_values);
    let mut policy = init_policy.clone();
    let (mut buffers, mut models) = if mamba {
        let mut buffers = vec![ReplayBuffer::new(config.buffer_window); k_used];
        let mut seen = Vec::new();
        let mut pairs = Vec::new();
        for (k, oracle) in oracles.iter().enumerate() {
            let trajs = full_rollouts(
                env,
                oracle,
                config.pretrain_rollouts,
                derive_seed(seed, stream(0, PRETRAIN + k as u64)),
                workers,
            )?;
            for t in &trajs {
                buffers[k].insert(0, mc_targets(t, 0, S::one()));
                pairs.extend(t.steps.iter().map(|s| (s.obs.clone(), s.action.clone())));
            }
            seen.extend(observations(&trajs));
        }
        let models = match exact.filter(|c| c.inject_values) {
            Some(ctx) => ctx.oracles[..k_used]
                .iter()
                .map(|pi| Ok(ValueModel::from_table(&policy_value(&ctx.mdp, pi)?)))
                .collect::<Result<Vec<_>>>()?,
            None => {
                let mut models = vec![proto; k_used];
                fit_all(&mut models, &buffers, config, 0)?;
                models
            }
        };
        policy = policy.update_whitening(&seen)?;
        if let (Some(bc), false) = (config.behavior_clone, pairs.is_empty()) {
            policy = behavior_clone(&policy, &pairs, bc.steps, bc.batch, S::lit(bc.lr), derive_seed(seed, stream(0, CLONE)))?;
        }
        (buffers, models)
    } else {
        (vec![ReplayBuffer::new(PG_GAE_BUFFER_WINDOW)], vec![proto])
    };

    let mut opt = OptimizerState::new(config.optimizer, policy.num_params());
    let mut best_policy = policy.clone();
    let mut best_return = f64::NEG_INFINITY;
    let mut rows = Vec::with_capacity(config.iterations);
    let (mut len_total, mut len_count) = (0usize, 0usize);

    for n in 1..=config.iterations {
        let evals = full_rollouts(env, &policy, config.eval_rollouts, derive_seed(seed, stream(n, EVAL)), workers)?;
        let mean_eval = evals.iter().map(|t| t.total_return().to_f64_lossy()).sum::<f64>() / evals.len() as f64;
        if mean_eval > best_return {
            best_return = mean_eval;
            best_policy = policy.clone();
        }

        let (current, estimate) = if mamba {
            let mut grad_trajs = full_rollouts(
                env,
                &policy,
                config.gradient_rollouts(),
                derive_seed(seed, stream(n, LEARNER)),
                workers,
            )?;
            let sampler = match config.switch_sampler {
                SwitchKind::Uniform => SwitchTimeSampler::uniform(horizon)?,
                SwitchKind::Geometric => {
                    let mean = if len_count == 0 { 0.0 } else { len_total as f64 / len_count as f64 };
                    SwitchTimeSampler::geometric(horizon, mean)?
                }
            };
            let riro = collect_seeded(config.value_rollouts(), derive_seed(seed, stream(n, RIRO)), workers, |_, rng| {
                let (t_e, weight) = sampler.sample(rng);
                let k = rng.gen_range(0..k_used);
                let mut e = env.fork(rng.next_u64());
                let mut traj = rollout_riro(e.as_mut(), &policy, &oracles[k], k, t_e, rng)?;
                traj.importance_weight = S::lit(weight);
                Ok(traj)
            })?;
            for traj in riro {
                match (traj.learner_only, traj.switch_oracle, traj.switch_time) {
                    (false, Some(k), Some(t_e)) => buffers[k].insert(n, mc_targets(&traj, t_e, traj.importance_weight)),
                    _ => grad_trajs.push(traj),
                }
            }
            for b in &mut buffers {
                b.advance(n);
            }
            len_total += grad_trajs.iter().map(Trajectory::len).sum::<usize>();
            len_count += grad_trajs.len();
            if !injected {
                fit_all(&mut models, &buffers, config, n)?;
            }
            let current = policy.update_whitening(&observations(&grad_trajs))?;
            let g = mamba_gradient(&grad_trajs, &current, &policy, &MaxBaseline(&models), lambda)?;
            (current, g)
        } else {
            let trajs = full_rollouts(
                env,
                &policy,
                config.rollouts_per_iter,
                derive_seed(seed, stream(n, LEARNER)),
                workers,
            )?;
            let current = policy.update_whitening(&observations(&trajs))?;
            let g = pg_gae_gradient(&trajs, &current, &policy, &models[0], lambda)?;
            for t in &trajs {
                buffers[0].insert(n, mc_targets(t, 0, S::one()));
            }
            (current, g)
        };
        let mut estimate: GradientEstimate<S> = estimate;

        let mut delta_check = None;
        if let Some((ctx, fmax, pi_max)) = &exact_targets {
            let reference = if mamba {
                exact_gradient(&ctx.mdp, &current, fmax, lambda)?
            } else {
                exact_policy_gradient(&ctx.mdp, &current)?
            };
            let bias = bias_from(&estimate.vector, &reference);
            estimate.bias_norm = Some(bias);
            let rollin = policy.tabulate(ctx.mdp.horizon(), ctx.mdp.num_base_states())?;
            let loss = online_loss_exact(&ctx.mdp, &rollin, pi_max, fmax, lambda)?;
            delta_check = Some((-loss).to_f64_lossy());
        }

        let (next_opt, params) = opt.step(&current.params(), &estimate.vector, &estimate.scores)?;
        opt = next_opt;
        policy = current.with_params(&params)?;
        if !mamba {
            fit_all(&mut models, &buffers, config, n)?;
        }

        rows.push(IterationRow {
            iter: n,
            mean_eval_return: mean_eval,
            best_return,
            grad_norm: estimate.norm().to_f64_lossy(),
            bias_norm: estimate.bias_norm.map(|b| b.to_f64_lossy()),
            variance_trace: Some(estimate.variance_trace.to_f64_lossy()),
            delta_check,
        });
    }

    Ok(RunRecord {
        rows,
        best_policy,
        final_policy: policy,
        value_models: models,
    })
}
