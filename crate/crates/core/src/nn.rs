//! Fully connected tanh networks over a flat parameter slice.
//!
//! Layer `l` stores its weights `sizes[l+1] x sizes[l]` row-major followed
//! by its biases. Hidden layers use tanh; the output layer is linear.

use rand::Rng;

use crate::scalar::Scalar;

pub(crate) fn num_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// Uniform fan-in initialization; the output layer is scaled by `out_scale`.
pub(crate) fn init<S: Scalar, R: Rng + ?Sized>(sizes: &[usize], rng: &mut R, out_scale: f64) -> Vec<S> {
    let mut theta = Vec::with_capacity(num_params(sizes));
    let layers = sizes.len() - 1;
    for (l, w) in sizes.windows(2).enumerate() {
        let bound = 1.0 / (w[0] as f64).sqrt();
        let scale = if l + 1 == layers { out_scale } else { 1.0 };
        for _ in 0..w[0] * w[1] {
            theta.push(S::lit(scale * rng.gen_range(-bound..bound)));
        }
        theta.extend(std::iter::repeat(S::zero()).take(w[1]));
    }
    theta
}

/// Activations of every layer, input first and output last.
pub(crate) fn forward<S: Scalar>(sizes: &[usize], theta: &[S], x: &[S]) -> Vec<Vec<S>> {
    let layers = sizes.len() - 1;
    let mut acts = Vec::with_capacity(sizes.len());
    acts.push(x.to_vec());
    let mut offset = 0;
    for l in 0..layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &theta[offset..offset + n_in * n_out];
        let b = &theta[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let input = &acts[l];
        let out: Vec<S> = (0..n_out)
            .map(|j| {
                let z = w[j * n_in..(j + 1) * n_in]
                    .iter()
                    .zip(input)
                    .fold(b[j], |acc, (&wi, &xi)| acc + wi * xi);
                if l + 1 < layers {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect();
        acts.push(out);
    }
    acts
}

/// Accumulates `d(out . grad_out)/d theta` into `grad`.
pub(crate) fn backward<S: Scalar>(sizes: &[usize], theta: &[S], acts: &[Vec<S>], grad_out: &[S], grad: &mut [S]) {
    let layers = sizes.len() - 1;
    let mut offsets = Vec::with_capacity(layers);
    let mut offset = 0;
    for l in 0..layers {
        offsets.push(offset);
        offset += sizes[l] * sizes[l + 1] + sizes[l + 1];
    }
    let mut delta = grad_out.to_vec();
    for l in (0..layers).rev() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let base = offsets[l];
        let input = &acts[l];
        for j in 0..n_out {
            let row = base + j * n_in;
            for i in 0..n_in {
                grad[row + i] += delta[j] * input[i];
            }
            grad[base + n_in * n_out + j] += delta[j];
        }
        if l > 0 {
            let w = &theta[base..base + n_in * n_out];
            delta = (0..n_in)
                .map(|i| {
                    let back: S = (0..n_out).map(|j| w[j * n_in + i] * delta[j]).sum();
                    back * (S::one() - input[i] * input[i])
                })
                .collect();
        }
    }
}
