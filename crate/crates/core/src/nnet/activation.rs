//! Elementwise activations and softmax.

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Gradient through ReLU given its input; the derivative at 0 is taken as 0.
pub fn relu_backward(input: &[f64], grad_out: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect()
}

pub fn sigmoid(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        })
        .collect()
}

/// Gradient through the sigmoid given its output `s`: `g * s * (1 - s)`.
pub fn sigmoid_backward(output: &[f64], grad_out: &[f64]) -> Vec<f64> {
    output
        .iter()
        .zip(grad_out)
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect()
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Vector-Jacobian product of softmax given its output `s`:
/// `s * (g - <g, s>)`.
pub fn softmax_backward(output: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let dot: f64 = output.iter().zip(grad_out).map(|(s, g)| s * g).sum();
    output
        .iter()
        .zip(grad_out)
        .map(|(&s, &g)| s * (g - dot))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::{check_input_gradient, ProbeReport};
    use crate::rng::{rng_from_seed, uniform};

    #[test]
    fn relu_values() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let s = softmax(&[1000.0, 999.0, -1000.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_is_stable() {
        let s = sigmoid(&[-800.0, 0.0, 800.0]);
        assert_eq!(s, vec![0.0, 0.5, 1.0]);
    }

    fn probe<F>(seed: u64, n: usize, f: F) -> ProbeReport
    where
        F: Fn(&[f64], &[f64]) -> (f64, Vec<f64>),
    {
        // Random linear read-out w of the output turns each op into a scalar.
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let (_, grad) = f(&x, &w);
        check_input_gradient(|x| f(x, &w).0, &x, &grad, 100, seed)
    }

    #[test]
    fn sigmoid_gradient() {
        let r = probe(1, 30, |x, w| {
            let s = sigmoid(x);
            (s.iter().zip(w).map(|(a, b)| a * b).sum(), sigmoid_backward(&s, w))
        });
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn softmax_gradient() {
        let r = probe(2, 7, |x, w| {
            let s = softmax(x);
            (s.iter().zip(w).map(|(a, b)| a * b).sum(), softmax_backward(&s, w))
        });
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn relu_gradient_away_from_kink() {
        let r = probe(3, 40, |x, w| {
            let y = relu(x);
            (y.iter().zip(w).map(|(a, b)| a * b).sum(), relu_backward(x, w))
        });
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
