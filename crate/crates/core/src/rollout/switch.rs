use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Distribution of the switch time `t_e` over `{0, .., T-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchTimeSampler {
    Uniform { horizon: usize },
    /// `p(i) ∝ (1-q) q^i` with `q = mean / (1 + mean)`, truncated to the
    /// horizon and renormalized.
    Geometric { horizon: usize, mean: f64 },
}

impl SwitchTimeSampler {
    pub fn uniform(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return invalid("switch-time horizon must be at least 1");
        }
        Ok(Self::Uniform { horizon })
    }

    pub fn geometric(horizon: usize, mean: f64) -> Result<Self> {
        if horizon == 0 {
            return invalid("switch-time horizon must be at least 1");
        }
        if !(mean >= 0.0 && mean.is_finite()) {
            return invalid(format!("geometric switch-time mean must be finite and >= 0, got {mean}"));
        }
        Ok(Self::Geometric { horizon, mean })
    }

    pub fn horizon(&self) -> usize {
        match *self {
            Self::Uniform { horizon } | Self::Geometric { horizon, .. } => horizon,
        }
    }

    pub fn pmf(&self) -> Vec<f64> {
        match *self {
            Self::Uniform { horizon } => vec![1.0 / horizon as f64; horizon],
            Self::Geometric { horizon, mean } => {
                let q = mean / (1.0 + mean);
                let raw: Vec<f64> = (0..horizon)
                    .map(|i| if i == 0 { 1.0 - q } else { (1.0 - q) * q.powi(i as i32) })
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|p| p / total).collect()
            }
        }
    }

    /// Importance weight `1 / (T p(t_e))` correcting towards uniform `t_e`.
    pub fn weight(&self, t_e: usize) -> f64 {
        match *self {
            Self::Uniform { .. } => 1.0,
            Self::Geometric { horizon, .. } => 1.0 / (horizon as f64 * self.pmf()[t_e]),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let t_e = match *self {
            Self::Uniform { horizon } => rng.gen_range(0..horizon),
            Self::Geometric { .. } => {
                let pmf = self.pmf();
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                for (i, &p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                chosen
            }
        };
        (t_e, self.weight(t_e))
    }
}
