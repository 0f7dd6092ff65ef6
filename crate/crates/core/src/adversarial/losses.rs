//! Batch losses and their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::{xent_loss, ParamSet};
use crate::profile::PropagationProfile;

use super::model::{concat, AdversarialModel, Extractor};

/// `(L_P, L_D, L_C, V)` for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub l_p: f64,
    pub l_d: f64,
    pub l_c: f64,
    pub v: f64,
}

/// `V = L_P - alpha L_D - beta L_C`.
pub fn value_function(l_p: f64, l_d: f64, l_c: f64, alpha: f64, beta: f64) -> f64 {
    l_p - alpha * l_d - beta * l_c
}

impl LossValues {
    pub fn new(l_p: f64, l_d: f64, l_c: f64, alpha: f64, beta: f64) -> Self {
        LossValues {
            l_p,
            l_d,
            l_c,
            v: value_function(l_p, l_d, l_c, alpha, beta),
        }
    }
}

pub(crate) fn check_labels<E: Extractor>(model: &AdversarialModel<E>, s: &PropagationProfile) -> Result<()> {
    let bad = |what: &str, got: usize, n: usize| {
        Err(Error::InvalidParameter(format!("{what} label {got} outside 0..{n}")))
    };
    if s.y >= model.predictor.outputs() {
        return bad("y", s.y, model.predictor.outputs());
    }
    if s.z >= model.discriminator.outputs() {
        return bad("z", s.z, model.discriminator.outputs());
    }
    if s.v >= model.classifier.outputs() {
        return bad("v", s.v, model.classifier.outputs());
    }
    Ok(())
}

/// Predictor outputs `u_i = P_y(.|E(x_i))`, to be used as constants.
pub fn detached_predictions<E: Extractor>(model: &AdversarialModel<E>, batch: &[PropagationProfile]) -> Result<Vec<Vec<f64>>> {
    batch
        .iter()
        .map(|s| {
            let (e, _) = model.extractor.forward(&s.features)?;
            model.predictor.probs(&e)
        })
        .collect()
}

/// `(L_D, L_C)` with the predictor's contribution fixed to `u`. The
/// predictor's parameters do not enter this function at all.
pub fn adversary_losses<E: Extractor>(
    model: &AdversarialModel<E>,
    batch: &[PropagationProfile],
    u: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if batch.is_empty() || u.len() != batch.len() {
        return Err(Error::LengthMismatch {
            expected: batch.len(),
            got: u.len(),
        });
    }
    let (mut l_d, mut l_c) = (0.0, 0.0);
    for (s, u) in batch.iter().zip(u) {
        check_labels(model, s)?;
        let (e, _) = model.extractor.forward(&s.features)?;
        let o = concat(&e, u);
        l_d += xent_loss(&model.discriminator.probs(&o)?, s.z).0;
        l_c += xent_loss(&model.classifier.probs(&o)?, s.v).0;
    }
    let m = batch.len() as f64;
    Ok((l_d / m, l_c / m))
}

/// Batch means of all three cross-entropies and `V`.
pub fn losses<E: Extractor>(
    model: &AdversarialModel<E>,
    batch: &[PropagationProfile],
    alpha: f64,
    beta: f64,
) -> Result<LossValues> {
    if batch.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    let mut l_p = 0.0;
    for s in batch {
        check_labels(model, s)?;
        let (e, _) = model.extractor.forward(&s.features)?;
        l_p += xent_loss(&model.predictor.probs(&e)?, s.y).0;
    }
    let u = detached_predictions(model, batch)?;
    let (l_d, l_c) = adversary_losses(model, batch, &u)?;
    Ok(LossValues::new(l_p / batch.len() as f64, l_d, l_c, alpha, beta))
}

/// Weights of the three losses in a combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub p: f64,
    pub d: f64,
    pub c: f64,
}

/// Gradient of `w.p L_P + w.d L_D + w.c L_C` with respect to every
/// parameter. The adversaries see the predictor output as a constant, so the
/// predictor's gradient receives only the `L_P` term.
pub fn gradients<E: Extractor>(
    model: &AdversarialModel<E>,
    batch: &[PropagationProfile],
    w: LossWeights,
) -> Result<(LossValues, AdversarialModel<E>)> {
    if batch.is_empty() {
        return Err(Error::Empty("gradient batch"));
    }
    let m = batch.len() as f64;
    let mut grads = model.zeros_like();
    let (mut l_p, mut l_d, mut l_c) = (0.0, 0.0, 0.0);
    for s in batch {
        check_labels(model, s)?;
        let (e, tape) = model.extractor.forward(&s.features)?;
        let (p, pt) = model.predictor.forward(&e)?;
        let o = concat(&e, &p);
        let (d, dt) = model.discriminator.forward(&o)?;
        let (c, ct) = model.classifier.forward(&o)?;
        let (lp, mut gp) = xent_loss(&p, s.y);
        let (ld, mut gd) = xent_loss(&d, s.z);
        let (lc, mut gc) = xent_loss(&c, s.v);
        l_p += lp;
        l_d += ld;
        l_c += lc;
        gp.iter_mut().for_each(|g| *g *= w.p / m);
        gd.iter_mut().for_each(|g| *g *= w.d / m);
        gc.iter_mut().for_each(|g| *g *= w.c / m);
        let mut ge = model.predictor.backward(&pt, &gp, &mut grads.predictor);
        let go_d = model.discriminator.backward(&dt, &gd, &mut grads.discriminator);
        let go_c = model.classifier.backward(&ct, &gc, &mut grads.classifier);
        for (k, g) in ge.iter_mut().enumerate() {
            *g += go_d[k] + go_c[k];
        }
        model.extractor.backward(tape, &ge, &mut grads.extractor);
    }
    Ok((LossValues::new(l_p / m, l_d / m, l_c / m, w.d.abs(), w.c.abs()), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::model::{Architecture, ModelParams};
    use crate::nnet::gradcheck::{check_param_gradient, flatten};
    use crate::rng::{rng_from_seed, uniform};

    fn small() -> (ModelParams, Vec<PropagationProfile>) {
        let arch = Architecture {
            input_len: 30,
            channels: 3,
            conv_layers: 3,
            pooled_layers: 2,
            hidden: 5,
            ..Architecture::default()
        };
        let mut m = ModelParams::new(&arch, 4).unwrap();
        let mut rng = rng_from_seed(5);
        for c in &mut m.extractor.layers {
            c.b.iter_mut().for_each(|b| *b = uniform(&mut rng, 0.05, 0.3));
        }
        let batch = (0..6)
            .map(|i| PropagationProfile {
                features: (0..30).map(|_| uniform(&mut rng, -1.0, 1.0)).collect(),
                y: i % 2,
                z: i % 5,
                v: (i * 3) % 5,
            })
            .collect();
        (m, batch)
    }

    #[test]
    fn value_function_arithmetic() {
        assert!((value_function(0.7, 1.6, 1.6, 0.5, 0.5) + 0.9).abs() < 1e-12);
    }

    #[test]
    fn uniform_outputs_give_log_class_counts() {
        let (mut m, batch) = small();
        for h in [&mut m.predictor, &mut m.discriminator, &mut m.classifier] {
            h.out.w.iter_mut().for_each(|w| *w = 0.0);
        }
        let l = losses(&m, &batch, 0.5, 0.5).unwrap();
        assert!((l.l_p - 2f64.ln()).abs() < 1e-12);
        assert!((l.l_d - 5f64.ln()).abs() < 1e-12);
        assert!((l.l_c - 5f64.ln()).abs() < 1e-12);
        assert!((l.v - (l.l_p - 0.5 * l.l_d - 0.5 * l.l_c)).abs() < 1e-12);
    }

    #[test]
    fn combined_gradient_matches_finite_differences() {
        let (m, batch) = small();
        let w = LossWeights { p: 1.0, d: -0.5, c: -0.3 };
        let (_, grads) = gradients(&m, &batch, w).unwrap();
        // With u frozen at the current predictor output, the objective is a
        // plain function of all parameters.
        let u = detached_predictions(&m, &batch).unwrap();
        let objective = |p: &ModelParams| {
            let lp = losses(p, &batch, 0.0, 0.0).unwrap().l_p;
            let (ld, lc) = adversary_losses(p, &batch, &u).unwrap();
            lp + w.d * ld + w.c * lc
        };
        let rep = check_param_gradient(&m, objective, &grads, 100, 9);
        assert!(rep.max_rel_error < 1e-4, "{rep:?}");
    }

    #[test]
    fn adversary_loss_does_not_reach_predictor() {
        let (m, batch) = small();
        let (_, g) = gradients(&m, &batch, LossWeights { p: 0.0, d: 1.0, c: 1.0 }).unwrap();
        assert!(flatten(&g.predictor).iter().all(|&v| v == 0.0));
        assert!(flatten(&g.extractor).iter().any(|&v| v != 0.0));
    }
}
