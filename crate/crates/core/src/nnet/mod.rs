//! A small neural-network kernel with hand-written backward passes.
//!
//! Layers store parameters as flat `Vec<f64>` in row-major order and never
//! own activations; forward passes return whatever the matching backward
//! pass needs. Gradient containers have the same type as the parameters
//! they belong to (see [`ParamSet::zeros_like`]), which keeps SGD and
//! checkpointing uniform across layers.

pub mod activation;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod pool;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, softmax, softmax_backward};
pub use checkpoint::{Checkpoint, NamedTensor};
pub use conv::Conv1d;
pub use dense::Dense;
pub use loss::{xent_loss, PROB_FLOOR};
pub use pool::{maxpool1d, maxpool1d_backward, Pooled};

use crate::error::{Error, Result};
use crate::rng::{uniform, Rng};

/// A collection of parameter tensors visited in a fixed order.
pub trait ParamSet {
    /// `(name, shape, values)` for every tensor, in a stable order.
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])>;

    /// Mutable views in the same order as [`ParamSet::tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    /// A same-shaped set filled with zeros, used as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, v)| v.len()).sum()
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Multiplies every value by `factor`.
    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Adds `other` elementwise; shapes must match.
    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src: Vec<Vec<f64>> = other.tensors().into_iter().map(|(_, _, v)| v.to_vec()).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            dst.iter_mut().zip(s).for_each(|(d, s)| *d += s);
        }
    }
}

/// One plain gradient-descent step, `theta <- theta - lr * grad`, applied
/// tensor by tensor in declaration order.
pub fn sgd_step<P: ParamSet>(params: &mut P, grads: &P, lr: f64) -> Result<()> {
    let g: Vec<(Vec<usize>, &[f64])> = grads.tensors().into_iter().map(|(_, s, v)| (s, v)).collect();
    let shapes: Vec<Vec<usize>> = params.tensors().into_iter().map(|(_, s, _)| s).collect();
    if shapes.len() != g.len() || shapes.iter().zip(&g).any(|(a, (b, _))| a != b) {
        return Err(Error::LengthMismatch {
            expected: shapes.len(),
            got: g.len(),
        });
    }
    for (p, (_, gv)) in params.tensors_mut().into_iter().zip(g) {
        p.iter_mut().zip(gv).for_each(|(p, g)| *p -= lr * g);
    }
    Ok(())
}

/// Glorot-uniform initialization: `U(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| uniform(rng, -r, r)).collect()
}

/// He-uniform initialization for layers followed by ReLU: `U(-r, r)` with
/// `r = sqrt(6 / fan_in)`, which keeps activation variance roughly constant
/// through deep ReLU stacks.
pub fn he_uniform(rng: &mut Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let r = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| uniform(rng, -r, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step_basics() {
        let mut d = Dense::zeros(2, 1);
        d.w = vec![1.0, -2.0];
        d.b = vec![0.5];
        let before = d.clone();
        let mut g = d.zeros_like();
        g.w = vec![3.0, 4.0];
        g.b = vec![1.0];
        sgd_step(&mut d, &g, 0.0).unwrap();
        assert_eq!(d, before);
        sgd_step(&mut d, &before.zeros_like(), 0.7).unwrap();
        assert_eq!(d, before);
        sgd_step(&mut d, &g, 0.1).unwrap();
        assert_eq!(d.w, vec![1.0 - 0.1 * 3.0, -2.0 - 0.1 * 4.0]);
    }

    #[test]
    fn init_bounds() {
        let mut rng = crate::rng::rng_from_seed(0);
        let g = glorot_uniform(&mut rng, 1000, 10, 5);
        assert!(g.iter().all(|v| v.abs() <= (6.0f64 / 15.0).sqrt()));
        let h = he_uniform(&mut rng, 1000, 6);
        assert!(h.iter().all(|v| v.abs() <= 1.0));
        assert!(h.iter().any(|v| v.abs() > 0.9));
    }

    #[test]
    fn sgd_on_square() {
        // f(theta) = theta^2, f' = 2 theta; from 1 with lr 0.1: 1 - 0.2 = 0.8.
        let mut d = Dense::zeros(1, 1);
        d.w = vec![1.0];
        let mut g = d.zeros_like();
        g.w = vec![2.0 * d.w[0]];
        sgd_step(&mut d, &g, 0.1).unwrap();
        assert!((d.w[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_rejects_shape_mismatch() {
        let mut d = Dense::zeros(2, 1);
        assert!(sgd_step(&mut d, &Dense::zeros(3, 1), 0.1).is_err());
    }
}
