//! Property suites over families of random tabular MDPs, the tree
//! counterexamples, the gradient checks, the sampled estimators and the
//! data-collection protocol. Each check reports its worst residual.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dp::{
    advantage_wrt_f, check_lambda_pdl, check_noneven_pdl, check_pdl, exact_gradient, exact_policy_gradient,
    fmax_baseline, i_step_advantage, lambda_advantage_exact, lambda_advantage_geometric, loss_finite_difference,
    max_aggregation_policy, max_following_policy, max_relative_error, online_loss_exact, policy_q_values,
    policy_return, policy_value, state_distributions, TabularPolicy, ValueTable,
};
use crate::env::trees::{leaf_index, tree_facts};
use crate::env::{
    make_gridworld, make_ordering_tree, make_random_mdp, make_switching_tree, Environment, OrderingVariant, TabularEnv,
    TabularMdp,
};
use crate::error::{invalid, Result};
use crate::learner::{
    aggrevate_gradient, estimate_gradient_bias_variance, lambda_advantages_on_trajectory, mamba_gradient,
    td_residuals, train_mamba, LearnerConfig,
};
use crate::optim::OptimizerConfig;
use crate::policy::{FeatureMap, Oracle, PolicyParams};
use crate::rollout::{collect_seeded, derive_seed, rollout_full, rollout_riro, SwitchTimeSampler};
use crate::value::mc_targets;

pub const LAMBDA_GRID: [f64; 5] = [0.0, 0.1, 0.5, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    /// residual <= tolerance
    AtMost,
    /// residual < tolerance
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub instances: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl CheckRow {
    pub fn at_most(name: impl Into<String>, instances: usize, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            instances,
            max_residual: residual + 0.0,
            tolerance,
            relation: Relation::AtMost,
            passed: residual <= tolerance,
        }
    }

    pub fn below(name: impl Into<String>, instances: usize, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            instances,
            max_residual: residual + 0.0,
            tolerance,
            relation: Relation::Below,
            passed: residual < tolerance,
        }
    }
}

impl fmt::Display for CheckRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::Below => "<",
        };
        write!(
            f,
            "{:<54} {:>7} {:>11.3e} {:>2} {:<9.1e} {}",
            self.name,
            self.instances,
            self.max_residual,
            rel,
            self.tolerance,
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}

pub fn all_passed(rows: &[CheckRow]) -> bool {
    rows.iter().all(|r| r.passed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Improvement,
    Trees,
    Gradients,
    Estimators,
    Protocol,
    All,
}

impl FromStr for Suite {
    type Err = crate::MambaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identities" => Self::Identities,
            "improvement" => Self::Improvement,
            "trees" => Self::Trees,
            "gradients" => Self::Gradients,
            "estimators" => Self::Estimators,
            "protocol" => Self::Protocol,
            "all" => Self::All,
            other => return invalid(format!("unknown suite {other:?}")),
        })
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Identities => identities(seed, 100),
        Suite::Improvement => improvement(seed, 100),
        Suite::Trees => trees(),
        Suite::Gradients => gradients(seed, 20),
        Suite::Estimators => estimators(seed, 100_000),
        Suite::Protocol => protocol(seed, 100_000),
        Suite::All => {
            let mut rows = Vec::new();
            for s in [
                Suite::Identities,
                Suite::Improvement,
                Suite::Trees,
                Suite::Gradients,
                Suite::Estimators,
                Suite::Protocol,
            ] {
                rows.extend(run_suite(s, seed)?);
            }
            Ok(rows)
        }
    }
}

/// Random MDP with `|S| <= 6`, `|A| <= 4`, `T <= 8`.
pub fn random_instance(seed: u64, index: usize) -> Result<(TabularMdp<f64>, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64));
    let n = rng.gen_range(2..=6);
    let m = rng.gen_range(2..=4);
    let horizon = rng.gen_range(1..=8);
    Ok((make_random_mdp(rng.next_u64(), n, m, horizon)?, rng))
}

pub fn random_policy<R: Rng>(rng: &mut R, mdp: &TabularMdp<f64>) -> Result<TabularPolicy<f64>> {
    let (n, m) = (mdp.num_base_states(), mdp.num_actions());
    let probs = (0..mdp.horizon())
        .map(|_| {
            (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|p| p / total).collect()
                })
                .collect()
        })
        .collect();
    TabularPolicy::new(probs)
}

pub fn random_deterministic_policy<R: Rng>(rng: &mut R, mdp: &TabularMdp<f64>) -> TabularPolicy<f64> {
    let m = mdp.num_actions();
    let choices: Vec<Vec<usize>> = (0..mdp.horizon())
        .map(|_| (0..mdp.num_base_states()).map(|_| rng.gen_range(0..m)).collect())
        .collect();
    TabularPolicy::deterministic(mdp.horizon(), mdp.num_base_states(), m, |t, s| choices[t][s])
}

pub fn random_baseline<R: Rng>(rng: &mut R, mdp: &TabularMdp<f64>) -> Result<ValueTable<f64>> {
    let scale = mdp.horizon() as f64;
    ValueTable::from_rows(
        (0..mdp.horizon())
            .map(|_| (0..mdp.num_base_states()).map(|_| scale * rng.gen::<f64>()).collect())
            .collect(),
    )
}

fn random_partition<R: Rng>(rng: &mut R, horizon: usize) -> Vec<usize> {
    let mut cuts = vec![0];
    cuts.extend((1..horizon).filter(|_| rng.gen_bool(0.4)));
    cuts.push(horizon);
    cuts
}

fn random_softmax<R: Rng>(rng: &mut R, mdp: &TabularMdp<f64>) -> Result<PolicyParams<f64>> {
    let pi = PolicyParams::tabular_softmax(mdp.horizon(), mdp.num_base_states(), mdp.num_actions());
    let theta: Vec<f64> = (0..pi.num_params()).map(|_| rng.gen_range(-1.5..1.5)).collect();
    pi.with_params(&theta)
}

/// Worst `|x|` over a table-shaped iterator.
fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |acc, v| acc.max(v))
}

fn states(mdp: &TabularMdp<f64>) -> impl Iterator<Item = (usize, usize)> {
    let n = mdp.num_base_states();
    (0..mdp.horizon()).flat_map(move |t| (0..n).map(move |s| (t, s)))
}

pub fn identities(seed: u64, count: usize) -> Result<Vec<CheckRow>> {
    let (mut pdl, mut lam, mut uneven, mut loss1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..count {
        let (mdp, mut rng) = random_instance(seed, i)?;
        let pi = random_policy(&mut rng, &mdp)?;
        let f = random_baseline(&mut rng, &mdp)?;
        pdl = pdl.max(check_pdl(&mdp, &pi, &f)?);
        for lambda in LAMBDA_GRID {
            lam = lam.max(check_lambda_pdl(&mdp, &pi, &f, lambda)?);
        }
        for _ in 0..3 {
            let part = random_partition(&mut rng, mdp.horizon());
            uneven = uneven.max(check_noneven_pdl(&mdp, &pi, &f, &part)?);
        }
        let loss = online_loss_exact(&mdp, &pi, &pi, &f, 1.0)?;
        let direct = f.at_init(mdp.init_dist()) - policy_return(&mdp, &pi)?;
        loss1 = loss1.max((loss - direct).abs());
    }
    Ok(vec![
        CheckRow::at_most("performance difference", count, pdl, 1e-10),
        CheckRow::at_most("lambda-weighted performance difference", count * LAMBDA_GRID.len(), lam, 1e-10),
        CheckRow::at_most("uneven-partition performance difference", count * 3, uneven, 1e-10),
        CheckRow::at_most("loss at lambda=1 equals f(d0) - V(d0)", count, loss1, 1e-10),
    ])
}

pub fn improvement(seed: u64, count: usize) -> Result<Vec<CheckRow>> {
    let tol = 1e-12;
    let mut v = [0.0f64; 7];
    for i in 0..count {
        let (mdp, mut rng) = random_instance(seed ^ 0x5eed, i)?;
        let k = if i % 2 == 0 { 2 } else { 3 };
        let oracles = (0..k)
            .map(|j| {
                if j == 0 {
                    Ok(random_deterministic_policy(&mut rng, &mdp))
                } else {
                    random_policy(&mut rng, &mdp)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let values = oracles.iter().map(|o| policy_value(&mdp, o)).collect::<Result<Vec<_>>>()?;
        let fmax = fmax_baseline(&values)?;
        let adv = advantage_wrt_f(&mdp, &fmax)?;
        let follow = max_following_policy(&mdp, &oracles, &values)?;
        let agg = max_aggregation_policy(&mdp, &fmax)?;
        let v_follow = policy_value(&mdp, &follow)?;
        let v_agg = policy_value(&mdp, &agg)?;

        v[0] = v[0].max(worst(states(&mdp).map(|(t, s)| -adv.under_policy(t, s, &follow))));
        v[1] = v[1].max(worst(
            states(&mdp).map(|(t, s)| adv.under_policy(t, s, &follow) - adv.under_policy(t, s, &agg)),
        ));
        v[2] = v[2].max(worst(states(&mdp).map(|(t, s)| fmax.get(t, s) - v_agg.get(t, s))));
        v[3] = v[3].max(worst(states(&mdp).map(|(t, s)| fmax.get(t, s) - v_follow.get(t, s))));
        for steps in 0..=mdp.horizon() {
            let a_i = i_step_advantage(&mdp, &agg, &fmax, steps)?;
            v[4] = v[4].max(worst(states(&mdp).map(|(t, s)| -a_i.under_policy(t, s, &agg))));
        }
        let rollin = random_policy(&mut rng, &mdp)?;
        for lambda in LAMBDA_GRID {
            v[5] = v[5].max(online_loss_exact(&mdp, &rollin, &agg, &fmax, lambda)?);
        }
        let qs = oracles.iter().map(|o| policy_q_values(&mdp, o)).collect::<Result<Vec<_>>>()?;
        for (t, s) in states(&mdp) {
            for a in 0..mdp.num_actions() {
                let best_q = qs.iter().map(|q| q[t][s][a]).fold(f64::NEG_INFINITY, f64::max);
                v[6] = v[6].max(best_q - fmax.get(t, s) - adv.get(t, s, a));
            }
        }
    }
    Ok(vec![
        CheckRow::at_most("max-following improves on f^max (-A^max)", count, v[0], tol),
        CheckRow::at_most("A^max(pi^max) >= A^max(pi^follow)", count, v[1], tol),
        CheckRow::at_most("V^{pi^max} >= f^max", count, v[2], tol),
        CheckRow::at_most("V^{pi^follow} >= f^max", count, v[3], tol),
        CheckRow::at_most("i-step A^max(pi^max) >= 0 for i <= T", count, v[4], tol),
        CheckRow::at_most("-loss(pi^max; lambda) >= 0", count * LAMBDA_GRID.len(), v[5], tol),
        CheckRow::at_most("max_k Q^k - f^max <= A^max", count, v[6], tol),
    ])
}

pub fn trees() -> Result<Vec<CheckRow>> {
    let tol = 1e-12;
    let mut rows = Vec::new();
    let sw = make_switching_tree::<f64>()?;
    let v_left = policy_return(&sw.mdp, &sw.left)?;
    let v_right = policy_return(&sw.mdp, &sw.right)?;
    // best leaf over paths with exactly one change of direction
    let one_switch = ["LLR", "LRR", "RRL", "RLL"]
        .iter()
        .map(|p| sw.leaf_rewards[leaf_index(p)])
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal = tree_facts(&sw)?.optimal_value;
    rows.push(CheckRow::at_most("switching tree: left oracle value 1/2", 1, (v_left - 0.5).abs(), tol));
    rows.push(CheckRow::at_most("switching tree: right oracle value 1/2", 1, (v_right - 0.5).abs(), tol));
    rows.push(CheckRow::at_most("switching tree: one-switch return 3/4", 1, (one_switch - 0.75).abs(), tol));
    rows.push(CheckRow::at_most("switching tree: optimal value 1", 1, (optimal - 1.0).abs(), tol));

    let a = tree_facts(&make_ordering_tree::<f64>(OrderingVariant::A)?)?;
    rows.push(CheckRow::at_most("ordering A: f^max left child 0.7", 1, (a.fmax_left_child - 0.7).abs(), tol));
    rows.push(CheckRow::at_most("ordering A: f^max right child 0.75", 1, (a.fmax_right_child - 0.75).abs(), tol));
    rows.push(CheckRow::at_most(
        "ordering A: max-following is optimal",
        1,
        (a.follow_value - a.optimal_value).abs(),
        tol,
    ));
    rows.push(CheckRow::at_most("ordering A: V^{pi^max} = 3/4", 1, (a.aggregation_value - 0.75).abs(), tol));
    let b = tree_facts(&make_ordering_tree::<f64>(OrderingVariant::B)?)?;
    rows.push(CheckRow::below(
        "ordering B: max-following suboptimal (V - V*)",
        1,
        b.follow_value - b.optimal_value,
        -tol,
    ));
    let c = tree_facts(&make_ordering_tree::<f64>(OrderingVariant::C)?)?;
    rows.push(CheckRow::at_most(
        "ordering C: pi^max optimal",
        1,
        (c.aggregation_value - c.optimal_value).abs(),
        tol,
    ));
    Ok(rows)
}

pub fn gradients(seed: u64, count: usize) -> Result<Vec<CheckRow>> {
    let (mut fd, mut pg) = (0.0f64, 0.0f64);
    for i in 0..count {
        let (mdp, mut rng) = random_instance(seed ^ 0x96ad, i)?;
        let pi = random_softmax(&mut rng, &mdp)?;
        let f = random_baseline(&mut rng, &mdp)?;
        let v_pi = policy_value(&mdp, &pi.tabulate(mdp.horizon(), mdp.num_base_states())?)?;
        let reference = exact_policy_gradient(&mdp, &pi)?;
        for lambda in LAMBDA_GRID {
            let g = exact_gradient(&mdp, &pi, &f, lambda)?;
            let numeric = loss_finite_difference(&mdp, &pi, &f, lambda, 1e-5)?;
            fd = fd.max(max_relative_error(&g, &numeric, FD_RELATIVE_FLOOR));
            let g_v = exact_gradient(&mdp, &pi, &v_pi, lambda)?;
            pg = pg.max(worst(g_v.iter().zip(&reference).map(|(a, b)| (a - b).abs())));
        }
    }
    Ok(vec![
        CheckRow::at_most("exact gradient vs finite differences (rel)", count * LAMBDA_GRID.len(), fd, 1e-5),
        CheckRow::at_most("baseline V^pi gives the policy gradient", count * LAMBDA_GRID.len(), pg, 1e-8),
    ])
}

/// Relative errors are taken against `max(|a|, |b|, floor)`, so coordinates
/// whose gradient is at the noise level are compared absolutely.
pub const FD_RELATIVE_FLOOR: f64 = 1e-4;

/// Largest `|mean_i - target_i| / se_i`; coordinates with zero spread must
/// match exactly.
fn worst_z(estimate: &crate::learner::GradientEstimate<f64>, target: &[f64]) -> f64 {
    let se = estimate.standard_errors();
    estimate
        .vector
        .iter()
        .zip(target)
        .zip(&se)
        .map(|((g, t), s)| {
            let err = (g - t).abs();
            if *s > 0.0 {
                err / s
            } else if err <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

pub fn estimators(seed: u64, rollouts: usize) -> Result<Vec<CheckRow>> {
    let mdp = make_random_mdp::<f64>(derive_seed(seed, 0xe5), 3, 2, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xe6));
    let oracles = vec![random_policy(&mut rng, &mdp)?, random_deterministic_policy(&mut rng, &mdp)];
    let values = oracles.iter().map(|o| policy_value(&mdp, o)).collect::<Result<Vec<_>>>()?;
    let fmax = fmax_baseline(&values)?;
    let base = PolicyParams::linear_softmax(FeatureMap::OneHotState { num_states: 3 }, 2);
    let theta: Vec<f64> = (0..base.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pi = base.with_params(&theta)?;
    let v_pi = policy_value(&mdp, &pi.tabulate(mdp.horizon(), 3)?)?;
    let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();

    let mut rows = Vec::new();
    let mut z_mamba = 0.0f64;
    for (j, lambda) in [0.0, 0.5, 0.9].into_iter().enumerate() {
        let (_, est) = estimate_gradient_bias_variance(&mdp, &pi, &fmax, &fmax, lambda, rollouts, derive_seed(seed, j as u64), 1)?;
        z_mamba = z_mamba.max(worst_z(&est, &neg(exact_gradient(&mdp, &pi, &fmax, lambda)?)));
    }
    rows.push(CheckRow::at_most("sampled gradient vs exact (std errors)", 3, z_mamba, 3.0));

    let mut z_pg = 0.0f64;
    let pg = neg(exact_policy_gradient(&mdp, &pi)?);
    for (j, lambda) in [0.0, 0.9].into_iter().enumerate() {
        let (_, est) = estimate_gradient_bias_variance(&mdp, &pi, &v_pi, &v_pi, lambda, rollouts, derive_seed(seed, 10 + j as u64), 1)?;
        z_pg = z_pg.max(worst_z(&est, &pg));
    }
    rows.push(CheckRow::at_most("baseline V^pi: sampled vs -grad V (std errors)", 2, z_pg, 3.0));

    let env = TabularEnv::new(Arc::new(mdp.clone()), seed);
    let trajs = collect_seeded(500, derive_seed(seed, 20), 1, |_, r| {
        let mut e = env.fork(r.next_u64());
        rollout_full(e.as_mut(), &pi, r)
    })?;
    let mut term = 0.0f64;
    for t in &trajs {
        let one = std::slice::from_ref(t);
        let a = mamba_gradient(one, &pi, &pi, &fmax, 0.0)?;
        let b = aggrevate_gradient(one, &pi, &fmax)?;
        term = term.max(worst(a.vector.iter().zip(&b.vector).map(|(x, y)| (x - y).abs())));
    }
    rows.push(CheckRow::at_most("lambda=0 equals one-step estimator per trajectory", trajs.len(), term, 1e-12));

    let mut rec = 0.0f64;
    for t in &trajs {
        let delta = td_residuals(t, &fmax)?;
        for lambda in LAMBDA_GRID {
            let adv = lambda_advantages_on_trajectory(t, &fmax, lambda)?;
            for (i, a) in adv.iter().enumerate() {
                let direct: f64 = delta[i..].iter().enumerate().map(|(k, d)| lambda.powi(k as i32) * d).sum();
                rec = rec.max((a - direct).abs());
            }
        }
    }
    let mut exact_rec = 0.0f64;
    for i in 0..20 {
        let (m, mut r) = random_instance(seed ^ 0x1a, i)?;
        let p = random_policy(&mut r, &m)?;
        let f = random_baseline(&mut r, &m)?;
        for lambda in LAMBDA_GRID {
            let a = lambda_advantage_exact(&m, &p, &f, lambda)?;
            let b = lambda_advantage_geometric(&m, &p, &f, lambda)?;
            exact_rec = exact_rec.max(a.max_abs_diff(&b));
        }
    }
    rows.push(CheckRow::at_most("trajectory recursion vs explicit sum", trajs.len() * LAMBDA_GRID.len(), rec, 1e-12));
    rows.push(CheckRow::at_most("exact recursion vs geometric i-step sum", 20 * LAMBDA_GRID.len(), exact_rec, 1e-12));
    Ok(rows)
}

pub fn protocol(seed: u64, draws: usize) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let horizon = 12;
    let sampler = SwitchTimeSampler::geometric(horizon, 4.0)?;
    let pmf = sampler.pmf();
    let mut counts = vec![0usize; horizon];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x77));
    for _ in 0..draws {
        counts[sampler.sample(&mut rng).0] += 1;
    }
    let n = draws as f64;
    let z_pmf = counts
        .iter()
        .zip(&pmf)
        .map(|(&c, &p)| (c as f64 / n - p).abs() / (p * (1.0 - p) / n).sqrt())
        .fold(0.0, f64::max);
    rows.push(CheckRow::at_most("geometric switch-time pmf (std errors)", horizon, z_pmf, 3.0));

    let mdp = make_random_mdp::<f64>(derive_seed(seed, 0x78), 4, 3, 6)?;
    let mut prng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x79));
    let learner = random_policy(&mut prng, &mdp)?;
    let oracle = random_policy(&mut prng, &mdp)?;
    let v_k = policy_value(&mdp, &oracle)?;
    let dist = state_distributions(&mdp, &learner)?;
    let exact: f64 = (0..mdp.horizon())
        .map(|t| dist.per_time[t].iter().zip(v_k.row(t)).map(|(d, v)| d * v).sum::<f64>())
        .sum::<f64>()
        / mdp.horizon() as f64;
    let env = TabularEnv::new(Arc::new(mdp.clone()), seed);
    for (label, sampler) in [
        ("uniform", SwitchTimeSampler::uniform(mdp.horizon())?),
        ("geometric", SwitchTimeSampler::geometric(mdp.horizon(), 2.0)?),
    ] {
        let targets = collect_seeded(draws, derive_seed(seed, 0x80), 1, |_, r| {
            let (t_e, w) = sampler.sample(r);
            let mut e = env.fork(r.next_u64());
            let traj = rollout_riro(e.as_mut(), &learner, &oracle, 0, t_e, r)?;
            Ok(mc_targets(&traj, t_e, w).first().map_or(0.0, |s| s.weight * s.target))
        })?;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let z = (mean - exact).abs() / (var / n).sqrt();
        rows.push(CheckRow::at_most(
            format!("weighted value targets, {label} switch (std errors)"),
            draws,
            z,
            3.0,
        ));
    }

    let jsonl = |workers: usize| -> Result<String> {
        let gw = make_gridworld::<f64>(4, 4, 8)?;
        let env = TabularEnv::new(Arc::new(gw.mdp.clone()), seed);
        let oracles: Vec<Oracle<f64>> = gw.oracles.iter().cloned().map(Oracle::from).collect();
        let config = LearnerConfig {
            num_oracles: 2,
            iterations: 5,
            optimizer: OptimizerConfig::adam().with_lr(0.1),
            seed,
            workers,
            ..Default::default()
        };
        let policy = PolicyParams::linear_softmax(FeatureMap::OneHotState { num_states: 16 }, 4);
        let record = train_mamba(&env, &oracles, &policy, &config, None)?;
        Ok(format!("{}{:?}", record.to_jsonl()?, record.final_policy.params()))
    };
    let first = jsonl(1)?;
    let same = first == jsonl(1)? && first == jsonl(4)?;
    rows.push(CheckRow::at_most("seeded runs are bit-identical", 3, if same { 0.0 } else { 1.0 }, 0.0));
    Ok(rows)
}
