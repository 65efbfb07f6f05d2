use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

pub const DEFAULT_DECAY: f64 = 0.999;
const MIN_STD: f64 = 1e-8;

/// Exponential moving averages of the first and second moments of the
/// inputs. The stored moments are already bias-corrected: each update uses
/// weight `(1 - decay) / (1 - decay^count)`, which equals dividing a
/// zero-initialized average by `1 - decay^count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Whitener<S> {
    pub mean: Vec<S>,
    pub second_moment: Vec<S>,
    pub decay: S,
    pub count: u64,
}

impl<S: Scalar> Whitener<S> {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![S::zero(); dim],
            second_moment: vec![S::zero(); dim],
            decay: S::lit(DEFAULT_DECAY),
            count: 0,
        }
    }

    pub fn with_decay(dim: usize, decay: S) -> Result<Self> {
        if !(decay > S::zero() && decay < S::one()) {
            return invalid(format!("whitening decay must lie in (0, 1), got {decay}"));
        }
        Ok(Self {
            decay,
            ..Self::new(dim)
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&self, batch: &[Vec<S>]) -> Result<Self> {
        let mut next = self.clone();
        for x in batch {
            if x.len() != self.dim() {
                return invalid(format!("whitener expects dimension {}, got {}", self.dim(), x.len()));
            }
            next.count += 1;
            // bias-corrected EMA weight (1 - d) / (1 - d^n), exactly 1 at n = 1
            let exponent = i32::try_from(next.count).unwrap_or(i32::MAX);
            let w = (S::one() - self.decay) / (S::one() - self.decay.powi(exponent));
            for ((m, v), &xi) in next.mean.iter_mut().zip(next.second_moment.iter_mut()).zip(x) {
                *m += w * (xi - *m);
                *v += w * (xi * xi - *v);
            }
        }
        Ok(next)
    }

    /// Mean and variance; `None` before any update.
    pub fn moments(&self) -> Option<(Vec<S>, Vec<S>)> {
        if self.count == 0 {
            return None;
        }
        let mean = self.mean.clone();
        let var = self
            .second_moment
            .iter()
            .zip(&mean)
            .map(|(&second, &m)| {
                let var = second - m * m;
                // below the rounding noise of the second moment
                if var <= S::epsilon() * S::lit(1e3) * second {
                    S::zero()
                } else {
                    var
                }
            })
            .collect();
        Some((mean, var))
    }

    pub fn whiten(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.dim() {
            return invalid(format!("whitener expects dimension {}, got {}", self.dim(), x.len()));
        }
        Ok(match self.moments() {
            None => x.to_vec(),
            Some((mean, var)) => x
                .iter()
                .zip(mean.iter().zip(&var))
                .map(|(&xi, (&m, &v))| (xi - m) / v.sqrt().max(S::lit(MIN_STD)))
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_whitener_passes_input_through() {
        let w = Whitener::<f64>::new(2);
        assert_eq!(w.whiten(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn constant_stream_whitens_to_zero() {
        let w = Whitener::<f64>::new(2).update(&vec![vec![2.5, -4.0]; 200]).unwrap();
        for v in w.whiten(&[2.5, -4.0]).unwrap() {
            assert!(v.abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn empty_batch_is_a_no_op() {
        let w = Whitener::<f64>::new(1).update(&[vec![1.0]]).unwrap();
        assert_eq!(w.update(&[]).unwrap(), w);
    }

    #[test]
    fn two_point_stream_has_unit_std() {
        let stream: Vec<Vec<f64>> = (0..1000).map(|i| vec![if i % 2 == 0 { -1.0 } else { 1.0 }]).collect();
        let w = Whitener::new(1).update(&stream).unwrap();
        let (_, var) = w.moments().unwrap();
        assert!((var[0].sqrt() - 1.0).abs() < 0.01, "{}", var[0].sqrt());
    }

    #[test]
    fn rejects_bad_decay_and_dimension() {
        assert!(Whitener::<f64>::with_decay(1, 1.0).is_err());
        assert!(Whitener::<f64>::new(2).update(&[vec![1.0]]).is_err());
    }
}
