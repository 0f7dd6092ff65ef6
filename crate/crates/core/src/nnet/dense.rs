use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{glorot_uniform, ParamSet};

/// Affine map `y = W x + b` with `W` stored row-major as `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Dense {
            w: glorot_uniform(rng, inputs * outputs, inputs, outputs),
            ..Dense::zeros(inputs, outputs)
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::LengthMismatch {
                expected: self.inputs,
                got: x.len(),
            });
        }
        Ok(self
            .w
            .chunks_exact(self.inputs)
            .zip(&self.b)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect())
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grads: &mut Dense) -> Vec<f64> {
        debug_assert_eq!(grad_out.len(), self.outputs);
        let mut grad_in = vec![0.0; self.inputs];
        for (o, &g) in grad_out.iter().enumerate() {
            grads.b[o] += g;
            let row = o * self.inputs..(o + 1) * self.inputs;
            for ((gw, w), (xi, gi)) in grads.w[row.clone()]
                .iter_mut()
                .zip(&self.w[row])
                .zip(x.iter().zip(grad_in.iter_mut()))
            {
                *gw += g * xi;
                *gi += g * w;
            }
        }
        grad_in
    }
}

impl ParamSet for Dense {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        vec![
            ("w".into(), vec![self.outputs, self.inputs], &self.w),
            ("b".into(), vec![self.outputs], &self.b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, &mut self.b]
    }

    fn zeros_like(&self) -> Self {
        Dense::zeros(self.inputs, self.outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::{check_input_gradient, check_param_gradient};
    use crate::rng::{rng_from_seed, uniform};

    #[test]
    fn identity_and_zero_weights() {
        let mut d = Dense::zeros(3, 3);
        for i in 0..3 {
            d.w[i * 3 + i] = 1.0;
        }
        assert_eq!(d.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let mut z = Dense::zeros(3, 2);
        z.b = vec![0.5, -1.0];
        assert_eq!(z.forward(&[9.0, 9.0, 9.0]).unwrap(), vec![0.5, -1.0]);
        assert!(z.forward(&[1.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng_from_seed(11);
        let mut d = Dense::init(7, 4, &mut rng);
        d.b.iter_mut().for_each(|b| *b = uniform(&mut rng, -1.0, 1.0));
        let x: Vec<f64> = (0..7).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let r: Vec<f64> = (0..4).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let readout = |y: Vec<f64>| y.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let mut grads = d.zeros_like();
        let gx = d.backward(&x, &r, &mut grads);
        let rx = check_input_gradient(|x| readout(d.forward(x).unwrap()), &x, &gx, 100, 1);
        let rp = check_param_gradient(&d, |p| readout(p.forward(&x).unwrap()), &grads, 100, 2);
        assert!(rx.max_rel_error < 1e-4, "{rx:?}");
        assert!(rp.max_rel_error < 1e-4, "{rp:?}");
    }
}
