//! First-order optimizers. Both kinds descend: they are fed the gradient of
//! a loss.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MambaError, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    /// Natural gradient with a damped empirical Fisher and a scalar
    /// Adam-style second moment on `g' F^-1 g`.
    NgdAdam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub damping: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam()
    }
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            damping: 1e-3,
        }
    }

    pub fn ngd_adam() -> Self {
        Self {
            kind: OptimizerKind::NgdAdam,
            lr: 0.1,
            ..Self::adam()
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OptimizerState<S> {
    pub config: OptimizerConfig,
    pub first_moment: Vec<S>,
    /// Per-coordinate for Adam, a single entry for NGD.
    pub second_moment: Vec<S>,
    pub step: u64,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new(config: OptimizerConfig, num_params: usize) -> Self {
        let second = match config.kind {
            OptimizerKind::Adam => num_params,
            OptimizerKind::NgdAdam => 1,
        };
        Self {
            config,
            first_moment: vec![S::zero(); num_params],
            second_moment: vec![S::zero(); second],
            step: 0,
        }
    }

    /// One update of `params` along `-gradient`. `scores` are the
    /// per-sample score vectors used to build the empirical Fisher of the
    /// NGD kind; Adam ignores them.
    pub fn step(&self, params: &[S], gradient: &[S], scores: &[Vec<S>]) -> Result<(Self, Vec<S>)> {
        if params.len() != gradient.len() || params.len() != self.first_moment.len() {
            return invalid(format!(
                "optimizer expects {} parameters, got params {} and gradient {}",
                self.first_moment.len(),
                params.len(),
                gradient.len()
            ));
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(MambaError::RejectedStep("non-finite gradient".into()));
        }
        let c = &self.config;
        let (lr, b1, b2, eps) = (S::lit(c.lr), S::lit(c.beta1), S::lit(c.beta2), S::lit(c.eps));
        let mut next = self.clone();
        next.step += 1;
        let k = i32::try_from(next.step).unwrap_or(i32::MAX);
        let mut out = params.to_vec();
        match c.kind {
            OptimizerKind::Adam => {
                let c1 = S::one() - b1.powi(k);
                let c2 = S::one() - b2.powi(k);
                for i in 0..out.len() {
                    let g = gradient[i];
                    next.first_moment[i] = b1 * next.first_moment[i] + (S::one() - b1) * g;
                    next.second_moment[i] = b2 * next.second_moment[i] + (S::one() - b2) * g * g;
                    let m_hat = next.first_moment[i] / c1;
                    let v_hat = next.second_moment[i] / c2;
                    out[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::NgdAdam => {
                let nat = damped_fisher_solve(scores, gradient, S::lit(c.damping))?;
                let curvature = dot(gradient, &nat).max(S::zero());
                next.second_moment[0] = b2 * next.second_moment[0] + (S::one() - b2) * curvature;
                let v_hat = next.second_moment[0] / (S::one() - b2.powi(k));
                let scale = lr / (v_hat.sqrt() + eps);
                for i in 0..out.len() {
                    out[i] -= scale * nat[i];
                }
            }
        }
        if out.iter().any(|p| !p.is_finite()) {
            return Err(MambaError::RejectedStep("update produced non-finite parameters".into()));
        }
        Ok((next, out))
    }
}

/// Solves `(F + damping I) x = g` with `F = (1/N) sum_i s_i s_i'` through
/// the Woodbury identity, so only an `N x N` system is factorized.
pub fn damped_fisher_solve<S: Scalar>(scores: &[Vec<S>], g: &[S], damping: S) -> Result<Vec<S>> {
    if !(damping > S::zero()) {
        return invalid("Fisher damping must be positive");
    }
    let n = scores.len();
    if n == 0 {
        return Ok(g.iter().map(|&v| v / damping).collect());
    }
    if scores.iter().any(|s| s.len() != g.len()) {
        return invalid("score vectors must match the gradient length");
    }
    // (δI + U U'/N)^-1 g = (g - U (Nδ I + U'U)^-1 U' g) / δ
    let nd = S::from_usize_lossy(n) * damping;
    let mut gram: Vec<Vec<S>> = (0..n)
        .map(|i| (0..n).map(|j| dot(&scores[i], &scores[j])).collect())
        .collect();
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += nd;
    }
    let rhs: Vec<S> = scores.iter().map(|s| dot(s, g)).collect();
    let y = cholesky_solve(gram, rhs)?;
    let mut x = g.to_vec();
    for (s, &yi) in scores.iter().zip(&y) {
        for (xk, &sk) in x.iter_mut().zip(s) {
            *xk -= yi * sk;
        }
    }
    Ok(x.into_iter().map(|v| v / damping).collect())
}

fn cholesky_solve<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > S::zero()) {
            return Err(MambaError::NumericDomain("matrix is not positive definite".into()));
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i][k] * b[k];
        }
        b[i] = v / a[i][i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= a[k][i] * b[k];
        }
        b[i] = v / a[i][i];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        for config in [OptimizerConfig::adam(), OptimizerConfig::ngd_adam()] {
            let state = OptimizerState::<f64>::new(config, 3);
            let (_, out) = state.step(&[1.0, -2.0, 0.5], &[0.0; 3], &[vec![1.0, 0.0, 2.0]]).unwrap();
            assert_eq!(out, vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn adam_shrinks_a_quadratic() {
        let mut state = OptimizerState::<f64>::new(OptimizerConfig::adam(), 1);
        let mut theta = vec![1.0];
        let mut prev = 1.0f64;
        for _ in 0..100 {
            let (s, t) = state.step(&theta, &[2.0 * theta[0]], &[]).unwrap();
            state = s;
            theta = t;
            assert!(theta[0].abs() < prev);
            prev = theta[0].abs();
        }
        assert_eq!(state.step, 100);
    }

    #[test]
    fn updates_are_pure() {
        let state = OptimizerState::<f64>::new(OptimizerConfig::ngd_adam(), 2);
        let scores = vec![vec![0.3, -0.1], vec![0.2, 0.4]];
        let a = state.step(&[0.1, 0.2], &[0.5, -0.3], &scores).unwrap();
        let b = state.step(&[0.1, 0.2], &[0.5, -0.3], &scores).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let state = OptimizerState::<f64>::new(OptimizerConfig::adam(), 1);
        assert!(matches!(state.step(&[0.0], &[f64::NAN], &[]), Err(MambaError::RejectedStep(_))));
    }

    #[test]
    fn woodbury_matches_dense_solve() {
        let scores: Vec<Vec<f64>> = vec![vec![1.0, 2.0, -1.0], vec![0.5, -0.3, 0.8]];
        let g = vec![0.2, -0.7, 1.1];
        let damping = 1e-3;
        let x = damped_fisher_solve(&scores, &g, damping).unwrap();
        // check (F + δI) x = g directly
        for r in 0..3 {
            let mut lhs = damping * x[r];
            for s in &scores {
                lhs += 0.5 * s[r] * dot(s, &x);
            }
            assert!((lhs - g[r]).abs() < 1e-9, "{lhs} vs {}", g[r]);
        }
    }
}
