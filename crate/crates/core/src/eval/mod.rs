//! Accuracy, TP/FP rates, ROC curves and AUROC, with per-motion and
//! per-environment breakdowns.

pub mod plot;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversarial::{AdversarialModel, Extractor};
use crate::channel::{EnvironmentClass, MotionClass};
use crate::error::{Error, Result};
use crate::io::write_file;
use crate::profile::PropagationProfile;

/// One scored test sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub score_on: f64,
    pub true_y: usize,
    pub z: usize,
    pub v: usize,
}

/// Decision rule: on-body only when the score strictly exceeds the
/// threshold, so ties are denied.
pub fn label_at(score_on: f64, threshold: f64) -> usize {
    usize::from(score_on > threshold)
}

/// Scores every profile with `model`.
pub fn predict_records<E: Extractor>(model: &AdversarialModel<E>, data: &[PropagationProfile]) -> Result<Vec<PredictionRecord>> {
    data.iter()
        .map(|p| {
            Ok(PredictionRecord {
                score_on: model.score_on(&p.features)?,
                true_y: p.y,
                z: p.z,
                v: p.v,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub n: usize,
    pub n_on: usize,
    pub n_off: usize,
    pub accuracy: f64,
    /// Absent when the group has no on-body samples.
    pub tp_rate: Option<f64>,
    /// Absent when the group has no off-body samples.
    pub fp_rate: Option<f64>,
}

pub fn rates(records: &[PredictionRecord], threshold: f64) -> Result<Rates> {
    if records.is_empty() {
        return Err(Error::Empty("prediction records"));
    }
    let (mut correct, mut n_on, mut tp, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for r in records {
        let pred = label_at(r.score_on, threshold);
        correct += usize::from(pred == r.true_y);
        if r.true_y == 1 {
            n_on += 1;
            tp += pred;
        } else {
            fp += pred;
        }
    }
    let n = records.len();
    let n_off = n - n_on;
    Ok(Rates {
        n,
        n_on,
        n_off,
        accuracy: correct as f64 / n as f64,
        tp_rate: (n_on > 0).then(|| tp as f64 / n_on as f64),
        fp_rate: (n_off > 0).then(|| fp as f64 / n_off as f64),
    })
}

pub fn motion_name(z: usize) -> String {
    MotionClass::from_index(z).map_or_else(|| format!("z{z}"), |m| m.name().to_string())
}

pub fn environment_name(v: usize) -> String {
    EnvironmentClass::from_index(v).map_or_else(|| format!("v{v}"), |e| e.name().to_string())
}

fn breakdown(records: &[PredictionRecord], threshold: f64, key: impl Fn(&PredictionRecord) -> String) -> Result<BTreeMap<String, Rates>> {
    let mut groups: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(*r);
    }
    groups.into_iter().map(|(k, g)| Ok((k, rates(&g, threshold)?))).collect()
}

/// Full evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub overall: Rates,
    /// Samples with controlled motion labels (`z < 5`).
    pub controlled: Option<Rates>,
    /// Samples with the uncontrolled motion label.
    pub uncontrolled: Option<Rates>,
    pub by_motion: BTreeMap<String, Rates>,
    pub by_environment: BTreeMap<String, Rates>,
    /// Absent when only one class is present.
    pub auroc: Option<f64>,
}

pub fn metrics(records: &[PredictionRecord], threshold: f64) -> Result<MetricsReport> {
    let uncontrolled_z = MotionClass::Uncontrolled.index();
    let split = |want: bool| -> Result<Option<Rates>> {
        let g: Vec<PredictionRecord> = records.iter().copied().filter(|r| (r.z == uncontrolled_z) == want).collect();
        if g.is_empty() {
            Ok(None)
        } else {
            rates(&g, threshold).map(Some)
        }
    };
    Ok(MetricsReport {
        threshold,
        overall: rates(records, threshold)?,
        controlled: split(false)?,
        uncontrolled: split(true)?,
        by_motion: breakdown(records, threshold, |r| motion_name(r.z))?,
        by_environment: breakdown(records, threshold, |r| environment_name(r.v))?,
        auroc: roc(records).ok().map(|c| auroc(&c)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Samples with `score >= threshold` are accepted as on-body.
    pub threshold: f64,
    pub fp_rate: f64,
    pub tp_rate: f64,
}

/// ROC curve from `(0, 0)` at threshold `+inf` to `(1, 1)` at `-inf`, one
/// point per distinct score.
pub fn roc(records: &[PredictionRecord]) -> Result<Vec<RocPoint>> {
    let n_on = records.iter().filter(|r| r.true_y == 1).count();
    let n_off = records.len() - n_on;
    if n_on == 0 || n_off == 0 {
        return Err(Error::InvalidParameter("ROC needs both on-body and off-body records".into()));
    }
    if records.iter().any(|r| !r.score_on.is_finite()) {
        return Err(Error::InvalidParameter("non-finite score".into()));
    }
    let mut sorted: Vec<&PredictionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| b.score_on.total_cmp(&a.score_on));
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        fp_rate: 0.0,
        tp_rate: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].score_on;
        while i < sorted.len() && sorted[i].score_on == s {
            if sorted[i].true_y == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(RocPoint {
            threshold: s,
            fp_rate: fp as f64 / n_off as f64,
            tp_rate: tp as f64 / n_on as f64,
        });
    }
    curve.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fp_rate: 1.0,
        tp_rate: 1.0,
    });
    Ok(curve)
}

/// Trapezoid-rule area under an ROC curve.
pub fn auroc(curve: &[RocPoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fp_rate - w[0].fp_rate) * (w[1].tp_rate + w[0].tp_rate) / 2.0)
        .sum()
}

/// `P(score_on > score_off) + P(tie) / 2` over all on/off pairs.
pub fn pair_statistic(records: &[PredictionRecord]) -> Option<f64> {
    let on: Vec<f64> = records.iter().filter(|r| r.true_y == 1).map(|r| r.score_on).collect();
    let off: Vec<f64> = records.iter().filter(|r| r.true_y != 1).map(|r| r.score_on).collect();
    if on.is_empty() || off.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for a in &on {
        for b in &off {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    Some(wins / (on.len() * off.len()) as f64)
}

fn fmt_threshold(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{t}")
    }
}

pub fn roc_to_csv(curve: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fp_rate,tp_rate\n");
    for p in curve {
        let _ = writeln!(out, "{},{},{}", fmt_threshold(p.threshold), p.fp_rate, p.tp_rate);
    }
    out
}

pub fn write_roc_csv(path: &Path, curve: &[RocPoint]) -> Result<()> {
    write_file(path, roc_to_csv(curve).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::softmax;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn rec(score_on: f64, true_y: usize) -> PredictionRecord {
        PredictionRecord { score_on, true_y, z: 0, v: 0 }
    }

    #[test]
    fn perfect_predictions() {
        let r = rates(&[rec(0.9, 1), rec(0.1, 0), rec(0.7, 1)], 0.5).unwrap();
        assert_eq!((r.accuracy, r.tp_rate, r.fp_rate), (1.0, Some(1.0), Some(0.0)));
    }

    #[test]
    fn ties_are_denied() {
        let r = rates(&[rec(0.5, 1), rec(0.5, 0)], 0.5).unwrap();
        assert_eq!((r.tp_rate, r.fp_rate), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn hand_counted_rates() {
        let mut recs: Vec<_> = (0..10).map(|i| rec(if i < 9 { 0.8 } else { 0.2 }, 1)).collect();
        recs.extend((0..10).map(|i| rec(if i < 1 { 0.8 } else { 0.2 }, 0)));
        let r = rates(&recs, 0.5).unwrap();
        assert_eq!((r.accuracy, r.tp_rate, r.fp_rate), (0.9, Some(0.9), Some(0.1)));
    }

    #[test]
    fn single_class_rates_are_absent() {
        let r = rates(&[rec(0.9, 1)], 0.5).unwrap();
        assert_eq!(r.fp_rate, None);
        assert!(roc(&[rec(0.9, 1)]).is_err());
        assert!(rates(&[], 0.5).is_err());
    }

    #[test]
    fn auroc_examples() {
        let sep = [rec(0.9, 1), rec(0.8, 1), rec(0.2, 0), rec(0.1, 0)];
        assert_eq!(auroc(&roc(&sep).unwrap()), 1.0);
        let mixed = [rec(0.9, 1), rec(0.8, 1), rec(0.4, 1), rec(0.7, 0), rec(0.3, 0), rec(0.2, 0)];
        let a = auroc(&roc(&mixed).unwrap());
        assert!((a - pair_statistic(&mixed).unwrap()).abs() < 1e-12);
        assert!((a - 8.0 / 9.0).abs() < 1e-9);
        let tied = [rec(0.5, 1), rec(0.5, 0)];
        assert_eq!(auroc(&roc(&tied).unwrap()), 0.5);
    }

    #[test]
    fn random_scores_give_chance_auroc() {
        let mut rng = rng_from_seed(3);
        let recs: Vec<_> = (0..4000).map(|i| rec(rng.random(), i % 2)).collect();
        assert!((auroc(&roc(&recs).unwrap()) - 0.5).abs() < 0.05);
    }

    #[test]
    fn breakdown_keys() {
        let recs = [
            PredictionRecord { score_on: 0.9, true_y: 1, z: 5, v: 4 },
            PredictionRecord { score_on: 0.1, true_y: 0, z: 0, v: 4 },
        ];
        let m = metrics(&recs, 0.5).unwrap();
        assert!(m.by_motion.contains_key("uncontrolled"));
        assert_eq!(m.by_environment["park"].n, 2);
        assert_eq!(m.uncontrolled.unwrap().n, 1);
        assert_eq!(m.controlled.unwrap().n, 1);
    }

    #[test]
    fn csv_layout() {
        let csv = roc_to_csv(&roc(&[rec(0.9, 1), rec(0.1, 0)]).unwrap());
        assert_eq!(csv, "threshold,fp_rate,tp_rate\ninf,0,0\n0.9,0,1\n0.1,1,1\n-inf,1,1\n");
    }

    proptest! {
        #[test]
        fn trapezoid_equals_pair_statistic(seed in 0u64..1000, n in 2usize..200, levels in 2u32..20) {
            // Coarse score levels force plenty of ties.
            let mut rng = rng_from_seed(seed);
            let mut recs: Vec<_> = (0..n)
                .map(|_| rec(f64::from(rng.random_range(0..levels)) / f64::from(levels), rng.random_range(0..2)))
                .collect();
            recs[0].true_y = 0;
            recs[1].true_y = 1;
            let curve = roc(&recs).unwrap();
            prop_assert!((auroc(&curve) - pair_statistic(&recs).unwrap()).abs() < 1e-9);
            prop_assert_eq!((curve[0].fp_rate, curve[0].tp_rate), (0.0, 0.0));
            prop_assert_eq!((curve[curve.len() - 1].fp_rate, curve[curve.len() - 1].tp_rate), (1.0, 1.0));
            for w in curve.windows(2) {
                prop_assert!(w[1].fp_rate >= w[0].fp_rate && w[1].tp_rate >= w[0].tp_rate);
            }
        }

        #[test]
        fn half_threshold_matches_argmax(l0 in -30.0f64..30.0, d in -1e-6f64..1e-6, big in proptest::bool::ANY) {
            let l1 = if big { l0 + d * 1e6 } else { l0 + d };
            let p = softmax(&[l0, l1]);
            prop_assert_eq!(label_at(p[1], 0.5), crate::adversarial::argmax_label(&p));
        }
    }

    #[test]
    fn exact_logit_tie_is_denied() {
        let p = softmax(&[0.3, 0.3]);
        assert_eq!(label_at(p[1], 0.5), 0);
    }
}
