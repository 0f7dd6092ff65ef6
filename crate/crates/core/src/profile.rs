//! Propagation profiles: the 380-dimensional feature vector built from one
//! 5 s RSS segment.
//!
//! Layout (fixed):
//!
//! | range     | content                                                     |
//! |-----------|-------------------------------------------------------------|
//! | 0..180    | time domain: scale (low, band, high) x 10 chunks x 6 stats  |
//! | 180..340  | spectral matrix M (4 windows x 40 intervals), row-major     |
//! | 340..380  | PC: per-interval share of the total magnitude               |
//!
//! Stats within a chunk are ordered max, min, median, variance, kurtosis,
//! skewness.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::channel::{BodyLabel, EnvironmentClass, MotionClass, RssTrace};
use crate::dsp::{
    apply_filter, design_fir, fft_magnitude, stats6, Band, FilterKernel, Signal,
    DEFAULT_TAPS, HIGH_CUTOFF_HZ, LOW_CUTOFF_HZ, SAMPLE_RATE_HZ,
};
use crate::error::{Error, Result};

pub const SEGMENT_SAMPLES: usize = 2500;
pub const CHUNKS: usize = 10;
pub const STATS: usize = 6;
pub const SCALES: usize = 3;
pub const TIME_FEATURES: usize = SCALES * CHUNKS * STATS;

pub const FFT_SIZE: usize = 1000;
pub const STFT_HOP: usize = 500;
pub const STFT_WINDOWS: usize = 4;
pub const LOW_INTERVALS: usize = 30;
pub const HIGH_INTERVALS: usize = 10;
pub const INTERVALS: usize = LOW_INTERVALS + HIGH_INTERVALS;
pub const FREQ_FEATURES: usize = STFT_WINDOWS * INTERVALS + INTERVALS;

pub const PROFILE_LEN: usize = TIME_FEATURES + FREQ_FEATURES;

const _: () = assert!(TIME_FEATURES == 180);
const _: () = assert!(FREQ_FEATURES == 200);
const _: () = assert!(PROFILE_LEN == 380);
const _: () = assert!((STFT_WINDOWS - 1) * STFT_HOP + FFT_SIZE == SEGMENT_SAMPLES);

/// Width of a low-band interval, Hz.
const LOW_INTERVAL_HZ: f64 = HIGH_CUTOFF_HZ / LOW_INTERVALS as f64;
/// Width of a high-band interval, Hz.
const HIGH_INTERVAL_HZ: f64 = (SAMPLE_RATE_HZ / 2.0 - HIGH_CUTOFF_HZ) / HIGH_INTERVALS as f64;

/// A 5 s slice of a trace, carrying the trace's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RssSegment {
    samples: Vec<f64>,
    pub y: BodyLabel,
    pub z: MotionClass,
    pub v: EnvironmentClass,
}

impl RssSegment {
    pub fn new(samples: Vec<f64>, y: BodyLabel, z: MotionClass, v: EnvironmentClass) -> Result<Self> {
        if samples.len() != SEGMENT_SAMPLES {
            return Err(Error::LengthMismatch {
                expected: SEGMENT_SAMPLES,
                got: samples.len(),
            });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("segment contains non-finite samples".into()));
        }
        Ok(RssSegment { samples, y, z, v })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn signal(&self) -> Signal {
        Signal::at_default_rate(self.samples.clone()).expect("segment samples are finite")
    }
}

/// Splits `trace` into consecutive non-overlapping segments of the default
/// 5 s length; the trailing remainder is dropped.
pub fn segment(trace: &RssTrace) -> Result<Vec<RssSegment>> {
    segment_with_len(trace, SEGMENT_SAMPLES)
}

/// [`segment`] with a configurable segment length. Only the default length
/// feeds [`build_profile`].
pub fn segment_with_len(trace: &RssTrace, len: usize) -> Result<Vec<RssSegment>> {
    let x = trace.signal.samples();
    if len == 0 || x.len() < len {
        return Err(Error::TooShort {
            got: x.len(),
            need: len.max(1),
        });
    }
    Ok(x.chunks_exact(len)
        .map(|c| RssSegment {
            samples: c.to_vec(),
            y: trace.y,
            z: trace.z,
            v: trace.v,
        })
        .collect())
}

struct Kernels {
    low: FilterKernel,
    band: FilterKernel,
    high: FilterKernel,
}

fn kernels() -> &'static Kernels {
    static KERNELS: OnceLock<Kernels> = OnceLock::new();
    KERNELS.get_or_init(|| {
        let make = |band| {
            design_fir(band, LOW_CUTOFF_HZ, HIGH_CUTOFF_HZ, DEFAULT_TAPS, SAMPLE_RATE_HZ)
                .expect("default filter bank is valid")
        };
        Kernels {
            low: make(Band::LowPass),
            band: make(Band::BandPass),
            high: make(Band::HighPass),
        }
    })
}

/// Large-scale (< 0.5 Hz), motion (0.5-15 Hz) and small-scale (> 15 Hz)
/// variations of a segment.
pub fn decompose(seg: &RssSegment) -> Result<(Signal, Signal, Signal)> {
    let k = kernels();
    let s = seg.signal();
    Ok((
        apply_filter(&s, &k.low)?,
        apply_filter(&s, &k.band)?,
        apply_filter(&s, &k.high)?,
    ))
}

/// Six statistics over ten equal chunks of each scale, scale-major.
pub fn time_features(low: &Signal, band: &Signal, high: &Signal) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(TIME_FEATURES);
    for scale in [low, band, high] {
        if scale.len() != SEGMENT_SAMPLES {
            return Err(Error::LengthMismatch {
                expected: SEGMENT_SAMPLES,
                got: scale.len(),
            });
        }
        for chunk in scale.samples().chunks_exact(SEGMENT_SAMPLES / CHUNKS) {
            out.extend(stats6(chunk)?.to_array());
        }
    }
    debug_assert_eq!(out.len(), TIME_FEATURES);
    Ok(out)
}

/// Spectrogram summary of a segment: `m[i][j]` is the summed FFT magnitude
/// of window `i` within frequency interval `j`; `pc[j]` is column `j`'s
/// share of the total.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub m: [[f64; INTERVALS]; STFT_WINDOWS],
    pub pc: [f64; INTERVALS],
}

/// Interval index of a frequency. The low band `[0, 15]` is split into 30
/// intervals of 0.5 Hz (`[0, 0.5)`, ..., `[14.5, 15]`), the rest of the
/// spectrum into 10 intervals of 23.5 Hz (`(15, 38.5)`, ..., `[226.5, 250]`).
pub fn interval_of(freq_hz: f64) -> usize {
    if freq_hz <= HIGH_CUTOFF_HZ {
        ((freq_hz / LOW_INTERVAL_HZ) as usize).min(LOW_INTERVALS - 1)
    } else {
        LOW_INTERVALS
            + (((freq_hz - HIGH_CUTOFF_HZ) / HIGH_INTERVAL_HZ) as usize).min(HIGH_INTERVALS - 1)
    }
}

pub fn spectral_matrix(seg: &RssSegment) -> Result<SpectralSummary> {
    let mut m = [[0.0; INTERVALS]; STFT_WINDOWS];
    for (i, row) in m.iter_mut().enumerate() {
        let start = i * STFT_HOP;
        let window = Signal::at_default_rate(seg.samples[start..start + FFT_SIZE].to_vec())?;
        let spec = fft_magnitude(&window, FFT_SIZE)?;
        for (k, &mag) in spec.magnitudes().iter().enumerate() {
            row[interval_of(spec.bin_frequency(k))] += mag;
        }
    }
    let mut pc = [0.0; INTERVALS];
    for (j, p) in pc.iter_mut().enumerate() {
        *p = m.iter().map(|row| row[j]).sum();
    }
    let total: f64 = pc.iter().sum();
    if total > 0.0 {
        pc.iter_mut().for_each(|p| *p /= total);
    } else {
        pc = [1.0 / INTERVALS as f64; INTERVALS];
    }
    Ok(SpectralSummary { m, pc })
}

/// Row-major `M` followed by PC.
pub fn freq_features(s: &SpectralSummary) -> Vec<f64> {
    let mut out = Vec::with_capacity(FREQ_FEATURES);
    for row in &s.m {
        out.extend_from_slice(row);
    }
    out.extend_from_slice(&s.pc);
    out
}

/// A feature vector with its labels. `y`: 0 off-body, 1 on-body; `z`:
/// motion index (5 = uncontrolled); `v`: environment index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationProfile {
    pub features: Vec<f64>,
    pub y: usize,
    pub z: usize,
    pub v: usize,
}

impl PropagationProfile {
    pub fn validate(&self) -> Result<()> {
        if self.features.len() != PROFILE_LEN {
            return Err(Error::LengthMismatch {
                expected: PROFILE_LEN,
                got: self.features.len(),
            });
        }
        if self.features.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("profile has non-finite features".into()));
        }
        if self.y > 1 || self.z >= MotionClass::ALL.len() || self.v >= EnvironmentClass::ALL.len() {
            return Err(Error::InvalidParameter(format!(
                "labels out of range: y {}, z {}, v {}",
                self.y, self.z, self.v
            )));
        }
        Ok(())
    }

    pub fn motion(&self) -> MotionClass {
        MotionClass::from_index(self.z).expect("validated motion index")
    }

    pub fn time_block(&self) -> &[f64] {
        &self.features[..TIME_FEATURES]
    }

    pub fn m_block(&self) -> &[f64] {
        &self.features[TIME_FEATURES..TIME_FEATURES + STFT_WINDOWS * INTERVALS]
    }

    pub fn pc_block(&self) -> &[f64] {
        &self.features[TIME_FEATURES + STFT_WINDOWS * INTERVALS..]
    }
}

/// Offset of a time-domain feature in the profile.
pub fn time_feature_index(scale: usize, chunk: usize, stat: usize) -> usize {
    (scale * CHUNKS + chunk) * STATS + stat
}

pub fn build_profile(seg: &RssSegment) -> Result<PropagationProfile> {
    let (low, band, high) = decompose(seg)?;
    let mut features = time_features(&low, &band, &high)?;
    features.extend(freq_features(&spectral_matrix(seg)?));
    let profile = PropagationProfile {
        features,
        y: seg.y.index(),
        z: seg.z.index(),
        v: seg.v.index(),
    };
    profile.validate()?;
    Ok(profile)
}

/// Profiles of every full segment of `trace`.
pub fn profiles_from_trace(trace: &RssTrace) -> Result<Vec<PropagationProfile>> {
    segment(trace)?.iter().map(build_profile).collect()
}

pub const MIN_STD: f64 = 1e-8;

/// Per-dimension z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits population mean and standard deviation; `std` is clamped at
    /// [`MIN_STD`].
    pub fn fit(profiles: &[PropagationProfile]) -> Result<Self> {
        let first = profiles.first().ok_or(Error::Empty("normalizer training set"))?;
        let dim = first.features.len();
        let n = profiles.len() as f64;
        let mut mean = vec![0.0; dim];
        for p in profiles {
            if p.features.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: p.features.len(),
                });
            }
            mean.iter_mut().zip(&p.features).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for p in profiles {
            var.iter_mut()
                .zip(p.features.iter().zip(&mean))
                .for_each(|(v, (x, m))| *v += (x - m) * (x - m));
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(MIN_STD)).collect();
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: features.len(),
            });
        }
        Ok(features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn apply(&self, profile: &PropagationProfile) -> Result<PropagationProfile> {
        Ok(PropagationProfile {
            features: self.apply_features(&profile.features)?,
            ..profile.clone()
        })
    }

    pub fn apply_all(&self, profiles: &[PropagationProfile]) -> Result<Vec<PropagationProfile>> {
        profiles.iter().map(|p| self.apply(p)).collect()
    }
}
