//! Central finite-difference gradient checks.

use rand::Rng as _;

use crate::rng::rng_from_seed;

use super::ParamSet;

/// Step for central differences.
pub const FD_STEP: f64 = 1e-4;

/// Denominator floor of the relative error, so exact zeros compare cleanly.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub probes: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest error, as a flat index.
    pub worst_index: usize,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_ERROR_FLOOR)
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += h;
    let fp = f(&xp);
    xp[i] = x[i] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}

/// Compares `grad` to central differences of `f` at `probes` random
/// coordinates of `x`.
pub fn check_input_gradient<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    grad: &[f64],
    probes: usize,
    seed: u64,
) -> ProbeReport {
    assert_eq!(x.len(), grad.len());
    let mut rng = rng_from_seed(seed);
    let mut report = ProbeReport {
        probes,
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for _ in 0..probes {
        let i = rng.random_range(0..x.len());
        let e = rel_error(grad[i], central_difference(&mut f, x, i, FD_STEP));
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst_index = i;
        }
    }
    report
}

/// Flattens every tensor of `p` into one vector, in declaration order.
pub fn flatten<P: ParamSet>(p: &P) -> Vec<f64> {
    p.tensors().into_iter().flat_map(|(_, _, v)| v.to_vec()).collect()
}

/// Writes a flat vector produced by [`flatten`] back into `p`.
pub fn unflatten<P: ParamSet>(p: &mut P, flat: &[f64]) {
    let mut it = flat.iter();
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v = *it.next().expect("flat vector too short");
        }
    }
    assert!(it.next().is_none(), "flat vector too long");
}

/// Parameter-space variant of [`check_input_gradient`]: `loss` is evaluated
/// at perturbed copies of `params`.
pub fn check_param_gradient<P, F>(params: &P, mut loss: F, grads: &P, probes: usize, seed: u64) -> ProbeReport
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> f64,
{
    let x = flatten(params);
    let g = flatten(grads);
    let mut scratch = params.clone();
    check_input_gradient(
        |flat| {
            unflatten(&mut scratch, flat);
            loss(&scratch)
        },
        &x,
        &g,
        probes,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_passes() {
        let x = [1.0, -2.0, 0.5];
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = check_input_gradient(|x| x.iter().map(|v| v * v).sum(), &x, &grad, 100, 0);
        assert!(r.max_rel_error < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let x = [1.0, -2.0, 0.5];
        let grad = [2.0, -4.0, 1.5];
        let r = check_input_gradient(|x| x.iter().map(|v| v * v).sum(), &x, &grad, 100, 0);
        assert!(r.max_rel_error > 0.1);
        assert_eq!(r.worst_index, 2);
    }
}
