//! Trajectory collection: full rollouts, roll-in/roll-out rollouts with an
//! oracle switch, switch-time sampling and seeded parallel collection.

pub mod switch;
pub mod trajectory;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use switch::SwitchTimeSampler;
pub use trajectory::{Step, Trajectory};

use crate::env::Environment;
use crate::error::{invalid, Result};
use crate::policy::Policy;
use crate::scalar::Scalar;

/// Runs `policy` from a reset until the episode ends.
pub fn rollout_full<S: Scalar>(
    env: &mut dyn Environment<S>,
    policy: &dyn Policy<S>,
    rng: &mut dyn RngCore,
) -> Result<Trajectory<S>> {
    let steps = run_episode(env, |_| policy, rng)?;
    Ok(Trajectory::new(steps))
}

/// The learner acts for `t < t_e`, then `oracle` finishes the episode. If
/// the episode ends before `t_e` the trajectory is flagged learner-only.
pub fn rollout_riro<S: Scalar>(
    env: &mut dyn Environment<S>,
    learner: &dyn Policy<S>,
    oracle: &dyn Policy<S>,
    oracle_index: usize,
    t_e: usize,
    rng: &mut dyn RngCore,
) -> Result<Trajectory<S>> {
    if t_e >= env.horizon() {
        return invalid(format!("switch time {t_e} outside 0..{}", env.horizon()));
    }
    let steps = run_episode(env, |t| if t < t_e { learner } else { oracle }, rng)?;
    let learner_only = steps.len() <= t_e;
    Ok(Trajectory {
        steps,
        switch_time: Some(t_e),
        switch_oracle: Some(oracle_index),
        importance_weight: S::one(),
        learner_only,
    })
}

fn run_episode<'p, S: Scalar>(
    env: &mut dyn Environment<S>,
    actor: impl Fn(usize) -> &'p dyn Policy<S>,
    rng: &mut dyn RngCore,
) -> Result<Vec<Step<S>>> {
    let horizon = env.horizon();
    let mut obs = env.reset();
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let action = actor(t).sample_action(&obs, rng)?;
        let out = env.step(&action)?;
        let done = out.done;
        steps.push(Step {
            t,
            obs,
            action,
            reward: out.reward,
            next: out.next.clone(),
            done,
        });
        if done {
            break;
        }
        obs = out.next;
    }
    Ok(steps)
}

/// Mixes a base seed and a stream index into an independent seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rollout parallelism from `MAMBA_WORKERS`, defaulting to one worker.
pub fn workers_from_env() -> usize {
    std::env::var("MAMBA_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or(1)
}

/// Runs `job(i, rng_i)` for `i in 0..count`, where `rng_i` is seeded from
/// `(base_seed, i)` alone. Results come back in index order, so the output
/// does not depend on the number of workers.
pub fn collect_seeded<T, F>(count: usize, base_seed: u64, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let run = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base_seed, i as u64));
        job(i, &mut rng)
    };
    if workers <= 1 || count <= 1 {
        return (0..count).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::error::MambaError::Environment(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(run).collect())
}
