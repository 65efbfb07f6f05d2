use std::sync::Arc;

use mamba_core::dp::{policy_value, TabularPolicy, ValueTable};
use mamba_core::env::{make_gridworld, make_random_mdp, TabularEnv, TabularMdp};
use mamba_core::learner::{
    estimate_gradient_bias_variance, rows_from_jsonl, train_mamba, Estimator, ExactContext, LearnerConfig,
};
use mamba_core::optim::OptimizerConfig;
use mamba_core::policy::{FeatureMap, Oracle, PolicyParams};
use mamba_core::MambaError;

fn chain(n: usize, horizon: usize) -> TabularMdp<f64> {
    let mut init = vec![0.0; n];
    init[0] = 1.0;
    let step = |s: usize, a: usize| {
        let mut row = vec![0.0; n];
        if a == 0 {
            row[(s + 1).min(n - 1)] += 0.8;
            row[s] += 0.2;
        } else {
            row[s.saturating_sub(1)] = 1.0;
        }
        row
    };
    let transition = (0..horizon)
        .map(|_| (0..n).map(|s| (0..2).map(|a| step(s, a)).collect()).collect())
        .collect();
    let reward = (0..horizon)
        .map(|_| (0..n).map(|s| vec![if s == n - 1 { 1.0 } else { 0.0 }; 2]).collect())
        .collect();
    TabularMdp::new(n, 2, horizon, init, transition, reward).unwrap()
}

fn tilted_policy(num_states: usize) -> PolicyParams<f64> {
    let base = PolicyParams::linear_softmax(FeatureMap::OneHotState { num_states }, 2);
    let theta: Vec<f64> = (0..base.num_params()).map(|i| if i % 2 == 0 { 0.8 } else { -0.3 }).collect();
    base.with_params(&theta).unwrap()
}

#[test]
fn aggrevated_iteration_gradient_matches_exact_loss_gradient() {
    let mdp = make_random_mdp::<f64>(11, 3, 2, 4).unwrap();
    let oracle = TabularPolicy::deterministic(4, 3, 2, |t, s| (t + s) % 2);
    let env = TabularEnv::new(Arc::new(mdp.clone()), 0);
    let exact = ExactContext {
        mdp: mdp.clone(),
        oracles: vec![oracle.clone()],
        inject_values: true,
    };
    let config = LearnerConfig {
        lambda: 0.0,
        num_oracles: 1,
        rollouts_per_iter: 4000,
        iterations: 3,
        eval_rollouts: 4,
        seed: 5,
        ..Default::default()
    };
    let rec = train_mamba(&env, &[oracle.into()], &tilted_policy(3), &config, Some(&exact)).unwrap();
    let n = config.gradient_rollouts() as f64;
    for row in &rec.rows {
        let bias = row.bias_norm.unwrap();
        let se = (row.variance_trace.unwrap() / n).sqrt();
        assert!(bias <= 3.0 * se, "iteration {}: bias {bias} vs standard error {se}", row.iter);
    }
}

#[test]
fn pg_gae_ignores_oracles_and_mamba_needs_them() {
    let gw = make_gridworld::<f64>(3, 3, 6).unwrap();
    let env = TabularEnv::new(Arc::new(gw.mdp.clone()), 0);
    let policy = PolicyParams::linear_softmax(FeatureMap::OneHotState { num_states: 9 }, 4);
    let pg = LearnerConfig {
        estimator: Estimator::PgGae,
        iterations: 3,
        ..Default::default()
    };
    assert_eq!(train_mamba(&env, &[], &policy, &pg, None).unwrap().rows.len(), 3);
    let mamba = LearnerConfig { iterations: 3, ..Default::default() };
    assert!(matches!(
        train_mamba(&env, &[], &policy, &mamba, None),
        Err(MambaError::InvalidArgument(_))
    ));
    let too_many = LearnerConfig { num_oracles: 3, ..mamba };
    let oracles: Vec<Oracle<f64>> = gw.oracles.iter().cloned().map(Oracle::from).collect();
    assert!(train_mamba(&env, &oracles, &policy, &too_many, None).is_err());
}

#[test]
fn run_record_is_ordered_monotone_and_round_trips() {
    let gw = make_gridworld::<f64>(4, 4, 8).unwrap();
    let env = TabularEnv::new(Arc::new(gw.mdp.clone()), 0);
    let oracles: Vec<Oracle<f64>> = gw.oracles.iter().cloned().map(Oracle::from).collect();
    let exact = ExactContext {
        mdp: gw.mdp.clone(),
        oracles: gw.oracles.clone(),
        inject_values: false,
    };
    let config = LearnerConfig {
        num_oracles: 2,
        iterations: 25,
        optimizer: OptimizerConfig::adam().with_lr(0.1),
        seed: 3,
        ..Default::default()
    };
    let policy = PolicyParams::linear_softmax(FeatureMap::OneHotState { num_states: 16 }, 4);
    let rec = train_mamba(&env, &oracles, &policy, &config, Some(&exact)).unwrap();
    for (i, pair) in rec.rows.windows(2).enumerate() {
        assert_eq!(pair[0].iter, i + 1);
        assert!(pair[1].best_return >= pair[0].best_return);
    }
    assert!(rec.rows.iter().all(|r| r.delta_check.unwrap() >= -1e-12));
    let text = rec.to_jsonl().unwrap();
    assert_eq!(rows_from_jsonl(&text).unwrap(), rec.rows);
    assert!(text.lines().next().unwrap().contains("\"mean_eval_return\""));
}

#[test]
fn exact_baseline_gives_unbiased_estimates() {
    let mdp = make_random_mdp::<f64>(2, 3, 2, 5).unwrap();
    let pi = tilted_policy(3);
    let oracle = TabularPolicy::deterministic(5, 3, 2, |_, s| s % 2);
    let f = policy_value(&mdp, &oracle).unwrap();
    let (stats, _) = estimate_gradient_bias_variance(&mdp, &pi, &f, &f, 0.5, 20_000, 1, 1).unwrap();
    assert!(stats.bias_norm <= 3.0 * stats.standard_error, "{stats:?}");
}

#[test]
fn baseline_shift_bias_grows_with_the_shift() {
    let mdp = make_random_mdp::<f64>(4, 3, 2, 4).unwrap();
    let pi = tilted_policy(3);
    let oracle = TabularPolicy::deterministic(4, 3, 2, |_, _| 0);
    let f = policy_value(&mdp, &oracle).unwrap();
    let shifted = |c: f64| -> ValueTable<f64> { f.map(|t, s, v| if t == 1 && s == 0 { v + c } else { v }) };
    let biases: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&c| {
            estimate_gradient_bias_variance(&mdp, &pi, &shifted(c), &f, 0.0, 20_000, 9, 1)
                .unwrap()
                .0
                .bias_norm
        })
        .collect();
    assert!(biases.windows(2).all(|w| w[1] > w[0]), "{biases:?}");
}

#[test]
fn longer_credit_window_raises_variance_on_a_chain() {
    let mdp = chain(6, 30);
    let pi = tilted_policy(6);
    let f = policy_value(&mdp, &pi.tabulate(30, 6).unwrap()).unwrap();
    let var = |lambda: f64| {
        estimate_gradient_bias_variance(&mdp, &pi, &f, &f, lambda, 5_000, 2, 1)
            .unwrap()
            .0
            .variance_trace
    };
    assert!(var(0.9) >= var(0.0));
}
