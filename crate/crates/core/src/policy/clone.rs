use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, Observation};
use crate::error::{invalid, Result};
use crate::policy::PolicyParams;
use crate::scalar::{axpy, Scalar};

/// Average log-likelihood of a dataset under a policy.
pub fn log_likelihood<S: Scalar>(policy: &PolicyParams<S>, data: &[(Observation<S>, Action<S>)]) -> Result<S> {
    let mut total = S::zero();
    for (obs, action) in data {
        total += policy.log_prob(obs, action)?;
    }
    Ok(total / S::from_usize_lossy(data.len().max(1)))
}

/// Maximizes the average log-likelihood of `(obs, action)` pairs by
/// minibatch gradient ascent. A batch at least as large as the dataset
/// uses the full dataset every step.
pub fn behavior_clone<S: Scalar>(
    policy: &PolicyParams<S>,
    data: &[(Observation<S>, Action<S>)],
    steps: usize,
    batch: usize,
    lr: S,
    seed: u64,
) -> Result<PolicyParams<S>> {
    if data.is_empty() {
        return invalid("behavior cloning needs a nonempty dataset");
    }
    if batch == 0 {
        return invalid("behavior cloning batch must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = policy.clone();
    let mut params = current.params();
    for _ in 0..steps {
        let chosen: Vec<usize> = if batch >= data.len() {
            (0..data.len()).collect()
        } else {
            sample(&mut rng, data.len(), batch).into_vec()
        };
        let scale = lr / S::from_usize_lossy(chosen.len());
        let mut grad = vec![S::zero(); params.len()];
        for &i in &chosen {
            let (obs, action) = &data[i];
            axpy(S::one(), &current.logprob_gradient(obs, action)?, &mut grad);
        }
        axpy(scale, &grad, &mut params);
        current = current.with_params(&params)?;
    }
    Ok(current)
}
