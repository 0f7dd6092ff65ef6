use crate::error::{Error, Result};

/// Output of [`maxpool1d`]: pooled values plus, for each output, the input
/// index (within its channel) that won.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling with kernel and stride 2 over `channels`
/// rows of length `len`. A trailing odd element is dropped; ties pick the
/// earlier index.
pub fn maxpool1d(x: &[f64], channels: usize, len: usize) -> Result<Pooled> {
    if len < 2 {
        return Err(Error::TooShort { got: len, need: 2 });
    }
    if x.len() != channels * len {
        return Err(Error::LengthMismatch {
            expected: channels * len,
            got: x.len(),
        });
    }
    let out_len = len / 2;
    let mut values = Vec::with_capacity(channels * out_len);
    let mut argmax = Vec::with_capacity(channels * out_len);
    for row in x.chunks_exact(len) {
        for j in 0..out_len {
            let (a, b) = (row[2 * j], row[2 * j + 1]);
            if b > a {
                values.push(b);
                argmax.push(2 * j + 1);
            } else {
                values.push(a);
                argmax.push(2 * j);
            }
        }
    }
    Ok(Pooled { values, argmax })
}

/// Routes each output gradient to the input position that won the max.
pub fn maxpool1d_backward(pooled: &Pooled, grad_out: &[f64], channels: usize, len: usize) -> Vec<f64> {
    let out_len = len / 2;
    let mut grad_in = vec![0.0; channels * len];
    for (k, (&g, &idx)) in grad_out.iter().zip(&pooled.argmax).enumerate() {
        grad_in[(k / out_len) * len + idx] += g;
    }
    grad_in
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::check_input_gradient;
    use crate::rng::{rng_from_seed, uniform};

    #[test]
    fn pooling_examples() {
        assert_eq!(maxpool1d(&[1.0, 3.0, 2.0, 2.0], 1, 4).unwrap().values, vec![3.0, 2.0]);
        let tie = maxpool1d(&[5.0, 5.0], 1, 2).unwrap();
        assert_eq!(tie.argmax, vec![0]);
        assert_eq!(maxpool1d_backward(&tie, &[1.0], 1, 2), vec![1.0, 0.0]);
        assert_eq!(maxpool1d(&[1.0, 2.0, 9.0], 1, 3).unwrap().values, vec![2.0]);
        assert!(maxpool1d(&[1.0], 1, 1).is_err());
    }

    #[test]
    fn two_channels_are_independent() {
        let p = maxpool1d(&[1.0, 0.0, 4.0, 0.0, 7.0, 8.0], 2, 3).unwrap();
        assert_eq!(p.values, vec![1.0, 7.0]);
        assert_eq!(maxpool1d_backward(&p, &[2.0, 3.0], 2, 3), vec![2.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn gradient_at_untied_points() {
        let mut rng = rng_from_seed(5);
        let (ch, len) = (3, 21);
        let x: Vec<f64> = (0..ch * len).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let p = maxpool1d(&x, ch, len).unwrap();
        let r: Vec<f64> = (0..p.values.len()).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let gx = maxpool1d_backward(&p, &r, ch, len);
        let f = |x: &[f64]| maxpool1d(x, ch, len).unwrap().values.iter().zip(&r).map(|(a, b)| a * b).sum();
        let rep = check_input_gradient(f, &x, &gx, 100, 6);
        assert!(rep.max_rel_error < 1e-4, "{rep:?}");
    }
}
