//! PHY-layer verifiers: decide from an empty-packet burst whether the sender
//! is on the user's body.

use serde::{Deserialize, Serialize};

use crate::adversarial::ModelParams;
use crate::channel::{BodyLabel, RssTrace};
use crate::dsp::Signal;
use crate::error::{Error, Result};
use crate::profile::{build_profile, decompose, segment, Normalizer, RssSegment};

/// Outcome of verifying one burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub on_body: bool,
    /// Mean per-segment score; larger means more on-body-like.
    pub score: f64,
    /// Segments voting on-body, out of `segments`.
    pub votes_on: usize,
    pub segments: usize,
}

pub trait Verifier {
    fn name(&self) -> &'static str;

    /// Score of one 5 s segment and whether it alone votes on-body.
    fn score_segment(&self, seg: &RssSegment) -> Result<(f64, bool)>;

    /// Splits the burst into 5 s segments and takes a strict majority vote;
    /// a tied vote is a denial.
    fn verify(&self, trace: &RssTrace) -> Result<Verdict> {
        let segs = segment(trace)?;
        let mut votes_on = 0;
        let mut total = 0.0;
        for seg in &segs {
            let (score, on) = self.score_segment(seg)?;
            total += score;
            votes_on += usize::from(on);
        }
        Ok(Verdict {
            on_body: 2 * votes_on > segs.len(),
            score: total / segs.len() as f64,
            votes_on,
            segments: segs.len(),
        })
    }
}

/// Reads the ground-truth sender position carried by the trace.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleVerifier;

impl Verifier for OracleVerifier {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn score_segment(&self, seg: &RssSegment) -> Result<(f64, bool)> {
        let on = seg.y == BodyLabel::On;
        Ok((if on { 1.0 } else { 0.0 }, on))
    }
}

/// `ln var(band) - 2 ln var(high)` over the scales of a segment.
///
/// Body motion raises the band-scale variance; off-body multipath fading
/// raises the high-scale variance, which is weighted double so that static
/// postures, with almost no band-scale energy, still score above off-body
/// senders.
pub fn band_variance_statistic(seg: &RssSegment) -> Result<f64> {
    let (_, band, high) = decompose(seg)?;
    let vb = variance(&band).max(f64::MIN_POSITIVE);
    let vh = variance(&high).max(f64::MIN_POSITIVE);
    Ok(vb.ln() - 2.0 * vh.ln())
}

fn variance(s: &Signal) -> f64 {
    let x = s.samples();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Non-learned baseline: on-body when [`band_variance_statistic`] exceeds
/// `cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVerifier {
    pub cutoff: f64,
}

impl ThresholdVerifier {
    pub const DEFAULT_CUTOFF: f64 = 0.0;

    /// Cutoff maximizing balanced accuracy on labeled traces, placed midway
    /// between adjacent sorted statistics.
    pub fn calibrate(traces: &[RssTrace]) -> Result<Self> {
        let mut stats = Vec::new();
        for t in traces {
            for seg in segment(t)? {
                stats.push((band_variance_statistic(&seg)?, seg.y == BodyLabel::On));
            }
        }
        let n_on = stats.iter().filter(|s| s.1).count();
        let n_off = stats.len() - n_on;
        if n_on == 0 || n_off == 0 {
            return Err(Error::InvalidParameter("calibration needs both on- and off-body traces".into()));
        }
        stats.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Cutoff below everything: all on-body.
        let (mut tp, mut fp) = (n_on, n_off);
        let mut best = (0.5, stats[0].0 - 1.0);
        for i in 0..stats.len() {
            if stats[i].1 {
                tp -= 1;
            } else {
                fp -= 1;
            }
            if i + 1 < stats.len() && stats[i + 1].0 == stats[i].0 {
                continue;
            }
            let bal = 0.5 * (tp as f64 / n_on as f64 + (n_off - fp) as f64 / n_off as f64);
            let cut = if i + 1 < stats.len() { 0.5 * (stats[i].0 + stats[i + 1].0) } else { stats[i].0 };
            if bal > best.0 {
                best = (bal, cut);
            }
        }
        Ok(ThresholdVerifier { cutoff: best.1 })
    }
}

impl Default for ThresholdVerifier {
    fn default() -> Self {
        ThresholdVerifier { cutoff: Self::DEFAULT_CUTOFF }
    }
}

impl Verifier for ThresholdVerifier {
    fn name(&self) -> &'static str {
        "threshold"
    }

    fn score_segment(&self, seg: &RssSegment) -> Result<(f64, bool)> {
        let s = band_variance_statistic(seg)?;
        Ok((s, s > self.cutoff))
    }
}

/// Trained adversarial model applied to normalized propagation profiles.
#[derive(Debug, Clone)]
pub struct LearnedVerifier {
    pub model: ModelParams,
    pub normalizer: Normalizer,
    pub threshold: f64,
}

impl LearnedVerifier {
    pub fn new(model: ModelParams, normalizer: Normalizer) -> Self {
        LearnedVerifier { model, normalizer, threshold: 0.5 }
    }
}

impl Verifier for LearnedVerifier {
    fn name(&self) -> &'static str {
        "learned"
    }

    fn score_segment(&self, seg: &RssSegment) -> Result<(f64, bool)> {
        let p = build_profile(seg)?;
        let x = self.normalizer.apply_features(&p.features)?;
        let s = self.model.score_on(&x)?;
        Ok((s, crate::eval::label_at(s, self.threshold) == 1))
    }
}
