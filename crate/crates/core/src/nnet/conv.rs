use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{he_uniform, ParamSet};

/// 1D convolution, stride 1, no padding. Weights are `(out, in, k)`
/// row-major; activations are `(channels, length)` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv1d {
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Conv1d {
            in_ch,
            out_ch,
            kernel,
            w: vec![0.0; out_ch * in_ch * kernel],
            b: vec![0.0; out_ch],
        }
    }

    /// He-uniform weights, zero biases.
    pub fn init(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut Rng) -> Self {
        Conv1d {
            w: he_uniform(rng, out_ch * in_ch * kernel, in_ch * kernel),
            ..Conv1d::zeros(in_ch, out_ch, kernel)
        }
    }

    pub fn out_len(&self, len: usize) -> Result<usize> {
        if len < self.kernel {
            return Err(Error::TooShort {
                got: len,
                need: self.kernel,
            });
        }
        Ok(len - self.kernel + 1)
    }

    fn weight(&self, o: usize, i: usize) -> &[f64] {
        let start = (o * self.in_ch + i) * self.kernel;
        &self.w[start..start + self.kernel]
    }

    pub fn forward(&self, x: &[f64], len: usize) -> Result<Vec<f64>> {
        let out_len = self.out_len(len)?;
        if x.len() != self.in_ch * len {
            return Err(Error::LengthMismatch {
                expected: self.in_ch * len,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.out_ch * out_len];
        for (o, row) in y.chunks_exact_mut(out_len).enumerate() {
            row.iter_mut().for_each(|v| *v = self.b[o]);
            for (i, xi) in x.chunks_exact(len).enumerate() {
                for (t, &w) in self.weight(o, i).iter().enumerate() {
                    for (yj, xj) in row.iter_mut().zip(&xi[t..t + out_len]) {
                        *yj += w * xj;
                    }
                }
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients into `grads`; returns the input
    /// gradient unless `need_input` is false (first layer).
    pub fn backward(&self, x: &[f64], len: usize, grad_out: &[f64], grads: &mut Conv1d, need_input: bool) -> Vec<f64> {
        let out_len = len + 1 - self.kernel;
        let mut grad_in = vec![0.0; if need_input { self.in_ch * len } else { 0 }];
        for (o, go) in grad_out.chunks_exact(out_len).enumerate() {
            grads.b[o] += go.iter().sum::<f64>();
            for (i, xi) in x.chunks_exact(len).enumerate() {
                let base = (o * self.in_ch + i) * self.kernel;
                for t in 0..self.kernel {
                    grads.w[base + t] += go.iter().zip(&xi[t..t + out_len]).map(|(g, x)| g * x).sum::<f64>();
                    if need_input {
                        let w = self.w[base + t];
                        let gi = &mut grad_in[i * len + t..i * len + t + out_len];
                        for (a, g) in gi.iter_mut().zip(go) {
                            *a += w * g;
                        }
                    }
                }
            }
        }
        grad_in
    }
}

impl ParamSet for Conv1d {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        vec![
            ("w".into(), vec![self.out_ch, self.in_ch, self.kernel], &self.w),
            ("b".into(), vec![self.out_ch], &self.b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, &mut self.b]
    }

    fn zeros_like(&self) -> Self {
        Conv1d::zeros(self.in_ch, self.out_ch, self.kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::{check_input_gradient, check_param_gradient};
    use crate::rng::{rng_from_seed, uniform};
    use proptest::prelude::*;

    #[test]
    fn identity_kernel_trims_edges() {
        let mut c = Conv1d::zeros(2, 2, 3);
        c.w[1] = 1.0; // (0, 0, center)
        c.w[(2 + 1) * 3 + 1] = 1.0; // (1, 1, center)
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(c.forward(&x, 4).unwrap(), vec![2.0, 3.0, 6.0, 7.0]);
    }

    #[test]
    fn zero_input_gives_bias() {
        let mut c = Conv1d::init(1, 3, 3, &mut rng_from_seed(0));
        c.b = vec![0.1, 0.2, 0.3];
        let y = c.forward(&[0.0; 5], 5).unwrap();
        assert_eq!(y, vec![0.1, 0.1, 0.1, 0.2, 0.2, 0.2, 0.3, 0.3, 0.3]);
    }

    #[test]
    fn short_input_rejected() {
        let c = Conv1d::zeros(1, 1, 3);
        assert!(matches!(c.forward(&[1.0, 2.0], 2), Err(Error::TooShort { got: 2, need: 3 })));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng_from_seed(21);
        let (cin, cout, len) = (3, 4, 12);
        let mut c = Conv1d::init(cin, cout, 3, &mut rng);
        c.b.iter_mut().for_each(|b| *b = uniform(&mut rng, -0.5, 0.5));
        let x: Vec<f64> = (0..cin * len).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let r: Vec<f64> = (0..cout * (len - 2)).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let readout = |y: Vec<f64>| y.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let mut grads = c.zeros_like();
        let gx = c.backward(&x, len, &r, &mut grads, true);
        let rx = check_input_gradient(|x| readout(c.forward(x, len).unwrap()), &x, &gx, 100, 1);
        let rp = check_param_gradient(&c, |p| readout(p.forward(&x, len).unwrap()), &grads, 100, 2);
        assert!(rx.max_rel_error < 1e-4, "{rx:?}");
        assert!(rp.max_rel_error < 1e-4, "{rp:?}");
    }

    proptest! {
        #[test]
        fn output_length_is_input_minus_two(len in 3usize..50, cout in 1usize..4) {
            let c = Conv1d::zeros(1, cout, 3);
            let y = c.forward(&vec![1.0; len], len).unwrap();
            prop_assert_eq!(y.len(), cout * (len - 2));
        }
    }
}
