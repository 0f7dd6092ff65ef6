//! Alternating minimax training of the four players.

use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::nnet::{sgd_step, xent_loss, ParamSet};
use crate::profile::PropagationProfile;
use crate::rng;

use super::losses::{check_labels, LossValues};
use super::model::{concat, AdversarialModel, Architecture, Extractor, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lr_e: f64,
    pub lr_p: f64,
    pub lr_d: f64,
    pub lr_c: f64,
    pub batch: usize,
    pub outer_iters: usize,
    pub inner_loops: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.5,
            beta: 0.5,
            lr_e: 0.05,
            lr_p: 0.05,
            lr_d: 0.05,
            lr_c: 0.05,
            batch: 128,
            outer_iters: 2000,
            inner_loops: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The same configuration with the adversarial weights zeroed: E and P
    /// train on `L_P` alone while D and C only observe.
    pub fn baseline(&self) -> Self {
        TrainConfig {
            alpha: 0.0,
            beta: 0.0,
            ..self.clone()
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return bad(format!("alpha {} and beta {} must be finite and >= 0", self.alpha, self.beta));
        }
        for (name, lr) in [("lr_e", self.lr_e), ("lr_p", self.lr_p), ("lr_d", self.lr_d), ("lr_c", self.lr_c)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if self.batch == 0 || self.outer_iters == 0 || self.inner_loops == 0 {
            return bad("batch, outer_iters and inner_loops must be at least 1".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: TrainConfig = read_json(path)?;
        c.validate()?;
        Ok(c)
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    #[serde(rename = "L_P")]
    pub l_p: f64,
    #[serde(rename = "L_D")]
    pub l_d: f64,
    #[serde(rename = "L_C")]
    pub l_c: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

impl LossRecord {
    fn new(iter: usize, l: LossValues) -> Self {
        LossRecord {
            iter,
            l_p: l.l_p,
            l_d: l.l_d,
            l_c: l.l_c,
            v: l.v,
        }
    }
}

pub fn write_history(path: &Path, history: &[LossRecord]) -> Result<()> {
    write_json(path, &history)
}

pub fn read_history(path: &Path) -> Result<Vec<LossRecord>> {
    read_json(path)
}

/// Mean of each loss over the last `window` records.
pub fn tail_mean(history: &[LossRecord], window: usize) -> Option<LossRecord> {
    let n = window.min(history.len());
    if n == 0 {
        return None;
    }
    let tail = &history[history.len() - n..];
    let mean = |f: fn(&LossRecord) -> f64| tail.iter().map(f).sum::<f64>() / n as f64;
    Some(LossRecord {
        iter: history[history.len() - 1].iter,
        l_p: mean(|r| r.l_p),
        l_d: mean(|r| r.l_d),
        l_c: mean(|r| r.l_c),
        v: mean(|r| r.v),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<E> {
    pub model: AdversarialModel<E>,
    pub history: Vec<LossRecord>,
}

fn scaled_xent_grad(p: &[f64], label: usize, scale: f64) -> (f64, Vec<f64>) {
    let (l, mut g) = xent_loss(p, label);
    g.iter_mut().for_each(|v| *v *= scale);
    (l, g)
}

/// Runs the alternating procedure from an initialized model.
///
/// Each outer iteration samples a batch without replacement, takes one step
/// on the predictor, then for each inner loop: computes the predictor output
/// `u` as a constant, steps D on `L_D`, steps C on `L_C`, and steps E on
/// `V = L_P - alpha L_D - beta L_C` using the just-updated D and C. The
/// recorded losses are those seen by the final E step of the iteration.
pub fn train_from<E: Extractor>(
    mut model: AdversarialModel<E>,
    data: &[PropagationProfile],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&LossRecord),
) -> Result<TrainOutcome<E>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if cfg.batch > data.len() {
        return Err(Error::InvalidParameter(format!(
            "batch {} exceeds the {} available samples",
            cfg.batch,
            data.len()
        )));
    }
    for s in data {
        check_labels(&model, s)?;
    }
    let mut batch_rng = rng::stream(cfg.seed, 1);
    let m = cfg.batch as f64;
    let e_len = model.extractor.output_len();
    let mut history = Vec::with_capacity(cfg.outer_iters);

    for iter in 0..cfg.outer_iters {
        let batch: Vec<&PropagationProfile> = index::sample(&mut batch_rng, data.len(), cfg.batch)
            .into_iter()
            .map(|i| &data[i])
            .collect();
        let mut fwd: Vec<_> = batch
            .iter()
            .map(|s| model.extractor.forward(&s.features))
            .collect::<Result<_>>()?;

        let mut gp = model.predictor.zeros_like();
        for ((e, _), s) in fwd.iter().zip(&batch) {
            let (p, tape) = model.predictor.forward(e)?;
            let (_, g) = scaled_xent_grad(&p, s.y, 1.0 / m);
            model.predictor.backward(&tape, &g, &mut gp);
        }
        sgd_step(&mut model.predictor, &gp, cfg.lr_p)?;

        let mut last = LossValues::new(0.0, 0.0, 0.0, cfg.alpha, cfg.beta);
        for inner in 0..cfg.inner_loops {
            if inner > 0 {
                fwd = batch
                    .iter()
                    .map(|s| model.extractor.forward(&s.features))
                    .collect::<Result<_>>()?;
            }
            let u: Vec<Vec<f64>> = fwd
                .iter()
                .map(|(e, _)| model.predictor.probs(e))
                .collect::<Result<_>>()?;
            let o: Vec<Vec<f64>> = fwd.iter().zip(&u).map(|((e, _), u)| concat(e, u)).collect();

            let mut gd = model.discriminator.zeros_like();
            for (o, s) in o.iter().zip(&batch) {
                let (p, tape) = model.discriminator.forward(o)?;
                let (_, g) = scaled_xent_grad(&p, s.z, 1.0 / m);
                model.discriminator.backward(&tape, &g, &mut gd);
            }
            sgd_step(&mut model.discriminator, &gd, cfg.lr_d)?;

            let mut gc = model.classifier.zeros_like();
            for (o, s) in o.iter().zip(&batch) {
                let (p, tape) = model.classifier.forward(o)?;
                let (_, g) = scaled_xent_grad(&p, s.v, 1.0 / m);
                model.classifier.backward(&tape, &g, &mut gc);
            }
            sgd_step(&mut model.classifier, &gc, cfg.lr_c)?;

            let mut ge = model.extractor.zeros_like();
            let mut scratch_p = model.predictor.zeros_like();
            let mut scratch_d = model.discriminator.zeros_like();
            let mut scratch_c = model.classifier.zeros_like();
            let (mut l_p, mut l_d, mut l_c) = (0.0, 0.0, 0.0);
            for (((e, tape), o), s) in std::mem::take(&mut fwd).into_iter().zip(&o).zip(&batch) {
                let (p, pt) = model.predictor.forward(&e)?;
                let (d, dt) = model.discriminator.forward(o)?;
                let (c, ct) = model.classifier.forward(o)?;
                let (lp, g_p) = scaled_xent_grad(&p, s.y, 1.0 / m);
                let (ld, g_d) = scaled_xent_grad(&d, s.z, -cfg.alpha / m);
                let (lc, g_c) = scaled_xent_grad(&c, s.v, -cfg.beta / m);
                l_p += lp;
                l_d += ld;
                l_c += lc;
                let mut g_e = model.predictor.backward(&pt, &g_p, &mut scratch_p);
                if cfg.alpha != 0.0 {
                    let g = model.discriminator.backward(&dt, &g_d, &mut scratch_d);
                    g_e.iter_mut().zip(&g[..e_len]).for_each(|(a, b)| *a += b);
                }
                if cfg.beta != 0.0 {
                    let g = model.classifier.backward(&ct, &g_c, &mut scratch_c);
                    g_e.iter_mut().zip(&g[..e_len]).for_each(|(a, b)| *a += b);
                }
                model.extractor.backward(tape, &g_e, &mut ge);
            }
            sgd_step(&mut model.extractor, &ge, cfg.lr_e)?;
            last = LossValues::new(l_p / m, l_d / m, l_c / m, cfg.alpha, cfg.beta);
        }
        let rec = LossRecord::new(iter, last);
        progress(&rec);
        history.push(rec);
    }
    Ok(TrainOutcome { model, history })
}

/// Retrains D and C on the frozen representation and predictor output of
/// `model`, approximating the optimal adversaries for the current E and P.
/// Returns the final batch-mean `(L_D, L_C)` over the whole of `data`.
pub fn refit_adversaries<E: Extractor>(
    model: &mut AdversarialModel<E>,
    data: &[PropagationProfile],
    lr: f64,
    iters: usize,
    batch: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if data.is_empty() || batch == 0 || batch > data.len() {
        return Err(Error::InvalidParameter(format!("cannot draw batches of {batch} from {} samples", data.len())));
    }
    let inputs: Vec<Vec<f64>> = data
        .iter()
        .map(|s| {
            check_labels(model, s)?;
            let (e, _) = model.extractor.forward(&s.features)?;
            let u = model.predictor.probs(&e)?;
            Ok(concat(&e, &u))
        })
        .collect::<Result<_>>()?;
    let mut rng = rng::stream(seed, 4);
    let m = batch as f64;
    for _ in 0..iters {
        let idx = index::sample(&mut rng, data.len(), batch);
        let mut gd = model.discriminator.zeros_like();
        let mut gc = model.classifier.zeros_like();
        for i in idx {
            let (p, t) = model.discriminator.forward(&inputs[i])?;
            model.discriminator.backward(&t, &scaled_xent_grad(&p, data[i].z, 1.0 / m).1, &mut gd);
            let (p, t) = model.classifier.forward(&inputs[i])?;
            model.classifier.backward(&t, &scaled_xent_grad(&p, data[i].v, 1.0 / m).1, &mut gc);
        }
        sgd_step(&mut model.discriminator, &gd, lr)?;
        sgd_step(&mut model.classifier, &gc, lr)?;
    }
    let (mut l_d, mut l_c) = (0.0, 0.0);
    for (o, s) in inputs.iter().zip(data) {
        l_d += xent_loss(&model.discriminator.probs(o)?, s.z).0;
        l_c += xent_loss(&model.classifier.probs(o)?, s.v).0;
    }
    let n = data.len() as f64;
    Ok((l_d / n, l_c / n))
}

/// Initializes a convolutional model from `cfg.seed` and trains it.
pub fn train(
    arch: &Architecture,
    data: &[PropagationProfile],
    cfg: &TrainConfig,
    progress: impl FnMut(&LossRecord),
) -> Result<TrainOutcome<super::model::ConvExtractor>> {
    let model = ModelParams::new(arch, cfg.seed)?;
    train_from(model, data, cfg, progress)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, uniform};

    fn toy_arch() -> Architecture {
        Architecture {
            channels: 8,
            hidden: 8,
            ..Architecture::default()
        }
    }

    /// Two informative features replicated across the 380 slots.
    fn toy_data(n: usize, seed: u64) -> Vec<PropagationProfile> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|i| {
                let y = i % 2;
                let sign = if y == 1 { 1.0 } else { -1.0 };
                let a = sign * uniform(&mut rng, 0.5, 1.5);
                let b = uniform(&mut rng, -1.0, 1.0);
                PropagationProfile {
                    features: (0..380).map(|k| if k < 190 { a } else { b }).collect(),
                    y,
                    z: (i / 2) % 5,
                    v: (i / 10) % 5,
                }
            })
            .collect()
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig::default().baseline().validate().is_ok());
        assert!(TrainConfig { alpha: -0.1, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr_d: 0.0, ..Default::default() }.validate().is_err());
        let data = toy_data(4, 0);
        let cfg = TrainConfig { batch: 5, ..Default::default() };
        assert!(train(&toy_arch(), &data, &cfg, |_| {}).is_err());
        assert!(train(&toy_arch(), &[], &TrainConfig::default(), |_| {}).is_err());
    }

    #[test]
    fn uncontrolled_labels_rejected() {
        let mut data = toy_data(4, 0);
        data[0].z = 5;
        let cfg = TrainConfig { batch: 2, outer_iters: 1, ..Default::default() };
        assert!(train(&toy_arch(), &data, &cfg, |_| {}).is_err());
    }

    #[test]
    fn separable_toy_is_learned() {
        let data = toy_data(200, 1);
        let cfg = TrainConfig {
            batch: 32,
            outer_iters: 500,
            seed: 3,
            ..TrainConfig::default().baseline()
        };
        let out = train(&toy_arch(), &data, &cfg, |_| {}).unwrap();
        let end = tail_mean(&out.history, 20).unwrap();
        assert!(end.l_p < 0.05, "final L_P {}", end.l_p);
    }

    #[test]
    fn history_is_consistent_and_deterministic() {
        let data = toy_data(60, 2);
        let cfg = TrainConfig {
            batch: 16,
            outer_iters: 15,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&toy_arch(), &data, &cfg, |_| {}).unwrap();
        let b = train(&toy_arch(), &data, &cfg, |_| {}).unwrap();
        assert_eq!(a.history.len(), 15);
        for r in &a.history {
            assert!((r.v - (r.l_p - cfg.alpha * r.l_d - cfg.beta * r.l_c)).abs() < 1e-12);
        }
        let bits = |h: &[LossRecord]| h.iter().map(|r| [r.l_p.to_bits(), r.l_d.to_bits(), r.l_c.to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&a.history), bits(&b.history));
        assert_eq!(a.model, b.model);
    }
}
