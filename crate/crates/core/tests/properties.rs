use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mamba_core::dp::{check_lambda_pdl, check_pdl, ValueTable};
use mamba_core::env::{make_random_mdp, Action, Environment, Observation, TabularEnv};
use mamba_core::learner::{lambda_advantages_on_trajectory, td_residuals};
use mamba_core::policy::{FeatureMap, PolicyParams, Whitener};
use mamba_core::rollout::{Step, Trajectory};
use mamba_core::value::{ReplayBuffer, WeightedReturnSample};
use mamba_core::verify::{random_baseline, random_instance, random_policy};

fn sample(t: usize) -> WeightedReturnSample<f64> {
    WeightedReturnSample {
        obs: Observation::tabular(t, 0),
        target: 0.0,
        weight: 1.0,
    }
}

fn random_trajectory(rewards: &[f64], states: &[usize]) -> Trajectory<f64> {
    let n = rewards.len();
    let steps = (0..n)
        .map(|t| Step {
            t,
            obs: Observation::tabular(t, states[t]),
            action: Action::Discrete(0),
            reward: rewards[t],
            next: Observation::tabular(t + 1, states[t + 1]),
            done: t + 1 == n,
        })
        .collect();
    Trajectory::new(steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_mdps_are_valid(seed in any::<u64>(), n in 2usize..7, m in 2usize..5, t in 1usize..9) {
        let mdp = make_random_mdp::<f64>(seed, n, m, t).unwrap();
        prop_assert!(mdp.validate().is_ok());
        let total: f64 = mdp.init_dist().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pdl_holds_on_random_instances(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let (mdp, mut rng) = random_instance(seed, 0).unwrap();
        let pi = random_policy(&mut rng, &mdp).unwrap();
        let f = random_baseline(&mut rng, &mdp).unwrap();
        prop_assert!(check_pdl(&mdp, &pi, &f).unwrap() <= 1e-10);
        prop_assert!(check_lambda_pdl(&mdp, &pi, &f, lambda).unwrap() <= 1e-10);
    }

    #[test]
    fn buffer_keeps_exactly_the_window(window in 1usize..6, schedule in prop::collection::vec((0usize..4, 0usize..4), 1..20)) {
        let mut buffer = ReplayBuffer::<f64>::new(window);
        let mut iteration = 0;
        let mut all: Vec<usize> = Vec::new();
        for (gap, count) in schedule {
            iteration += gap;
            buffer.insert(iteration, (0..count).map(|_| sample(iteration)));
            all.extend(std::iter::repeat(iteration).take(count));
            let oldest = (iteration + 1).saturating_sub(window);
            prop_assert!(buffer.iterations().all(|it| it >= oldest));
            let expected = all.iter().filter(|&&it| it >= oldest).count();
            prop_assert_eq!(buffer.len(), expected);
        }
    }

    #[test]
    fn trajectory_recursion_matches_the_direct_sum(
        rewards in prop::collection::vec(0.0f64..=1.0, 1..12),
        lambda in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let n = rewards.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states: Vec<usize> = (0..=n).map(|_| rand::Rng::gen_range(&mut rng, 0..3)).collect();
        let traj = random_trajectory(&rewards, &states);
        let mdp = make_random_mdp::<f64>(seed, 3, 2, n).unwrap();
        let f: ValueTable<f64> = random_baseline(&mut rng, &mdp).unwrap();
        let deltas = td_residuals(&traj, &f).unwrap();
        let adv = lambda_advantages_on_trajectory(&traj, &f, lambda).unwrap();
        for t in 0..n {
            let direct: f64 = (t..n).map(|tau| lambda.powi((tau - t) as i32) * deltas[tau]).sum();
            prop_assert!((adv[t] - direct).abs() <= 1e-12, "t={} {} vs {}", t, adv[t], direct);
        }
    }

    #[test]
    fn scores_have_zero_mean(seed in any::<u64>(), t in 0usize..5, s in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..len).map(|_| rand::Rng::gen_range(rng, -2.0..2.0)).collect()
        };
        let shapes = [
            PolicyParams::tabular_softmax(5, 4, 3),
            PolicyParams::linear_softmax(FeatureMap::OneHotState { num_states: 4 }, 3),
            PolicyParams::linear_softmax(FeatureMap::OneHotTimeState { horizon: 5, num_states: 4 }, 3),
        ];
        for base in shapes {
            let flat = theta(base.num_params(), &mut rng);
            let pi = base.with_params(&flat).unwrap();
            let obs = Observation::tabular(t, s);
            let mut acc = vec![0.0; pi.num_params()];
            for a in 0..3 {
                let action = Action::Discrete(a);
                let p = pi.log_prob(&obs, &action).unwrap().exp();
                for (x, g) in acc.iter_mut().zip(pi.logprob_gradient(&obs, &action).unwrap()) {
                    *x += p * g;
                }
            }
            prop_assert!(acc.iter().all(|x| x.abs() <= 1e-10));
            let back = PolicyParams::<f64>::from_json(&pi.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, pi);
        }
    }

    #[test]
    fn whitening_has_nonnegative_variance_and_centers_constants(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..30),
        c in -3.0f64..3.0,
    ) {
        let w = Whitener::<f64>::new(3).update(&rows).unwrap();
        let (_, var) = w.moments().unwrap();
        prop_assert!(var.iter().all(|v| *v >= 0.0));
        let constant = vec![vec![c; 3]; 8];
        let mut w = Whitener::<f64>::new(3);
        for _ in 0..50 {
            w = w.update(&constant).unwrap();
        }
        prop_assert!(w.whiten(&[c; 3]).unwrap().iter().all(|x| x.abs() <= 1e-6));
    }

    #[test]
    fn tabular_env_is_deterministic(seed in any::<u64>(), actions in prop::collection::vec(0usize..3, 6)) {
        let mdp = Arc::new(make_random_mdp::<f64>(seed, 4, 3, 6).unwrap());
        let run = || {
            let mut env = TabularEnv::new(mdp.clone(), seed ^ 7);
            let mut out = vec![env.reset()];
            for &a in &actions {
                let o = env.step(&Action::Discrete(a)).unwrap();
                out.push(o.next.clone());
                if o.done { break; }
            }
            out
        };
        prop_assert_eq!(run(), run());
    }
}
