//! Synthetic on-body and off-body RSS traces.
//!
//! On-body links follow the creeping-wave field model with a motion-driven
//! surface attenuation ([`creeping`]); off-body links follow log-distance
//! path loss over a wandering attacker plus Rician small-scale fading
//! ([`offbody`]). Both pass through the same receiver model: complex AWGN at
//! the environment's noise floor, power averaged over a few raw samples per
//! RSS reading, clamped to the receiver's reporting range.

pub mod creeping;
pub mod dataset;
pub mod offbody;

use serde::{Deserialize, Serialize};

use crate::dsp::Signal;
use crate::rng::{gaussian, Rng};

pub use creeping::{
    attenuation_model, creeping_field_magnitude, field_to_dbm, gen_onbody_trace, CreepingWaveParams,
};
pub use dataset::{gen_dataset, CellCount, DatasetSpec, ManifestEntry, TraceMeta};
pub use offbody::{gen_offbody_trace, DEFAULT_ATTACKER_RANGE_M};

/// Carrier frequency of the simulated links.
pub const CARRIER_HZ: f64 = 2.4e9;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum wave impedance in ohms.
pub const ETA_0: f64 = 376.730_313_668;

/// Default trace length: one minute per trial.
pub const DEFAULT_DURATION_S: f64 = 60.0;
/// Shortest trace that still yields one 5 s segment.
pub const MIN_DURATION_S: f64 = 5.0;

/// Lowest and highest RSS value the receiver reports.
pub const RSS_FLOOR_DBM: f64 = -110.0;
pub const RSS_CEIL_DBM: f64 = -20.0;

/// Raw complex samples averaged per RSS reading.
const RAW_SAMPLES_PER_READING: usize = 16;

pub fn wavelength() -> f64 {
    SPEED_OF_LIGHT / CARRIER_HZ
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyLabel {
    Off,
    On,
}

impl BodyLabel {
    pub fn index(self) -> usize {
        match self {
            BodyLabel::Off => 0,
            BodyLabel::On => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(BodyLabel::Off),
            1 => Some(BodyLabel::On),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionClass {
    Sitting,
    Standing,
    ArmMoving,
    Rotating,
    Walking,
    Uncontrolled,
}

impl MotionClass {
    /// The five motions used for training.
    pub const CONTROLLED: [MotionClass; 5] = [
        MotionClass::Sitting,
        MotionClass::Standing,
        MotionClass::ArmMoving,
        MotionClass::Rotating,
        MotionClass::Walking,
    ];

    pub const ALL: [MotionClass; 6] = [
        MotionClass::Sitting,
        MotionClass::Standing,
        MotionClass::ArmMoving,
        MotionClass::Rotating,
        MotionClass::Walking,
        MotionClass::Uncontrolled,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_controlled(self) -> bool {
        self != MotionClass::Uncontrolled
    }

    pub fn is_static(self) -> bool {
        matches!(self, MotionClass::Sitting | MotionClass::Standing)
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionClass::Sitting => "sitting",
            MotionClass::Standing => "standing",
            MotionClass::ArmMoving => "arm_moving",
            MotionClass::Rotating => "rotating",
            MotionClass::Walking => "walking",
            MotionClass::Uncontrolled => "uncontrolled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentClass {
    Laboratory,
    Office,
    Corridor,
    Rooftop,
    Park,
}

impl EnvironmentClass {
    pub const ALL: [EnvironmentClass; 5] = [
        EnvironmentClass::Laboratory,
        EnvironmentClass::Office,
        EnvironmentClass::Corridor,
        EnvironmentClass::Rooftop,
        EnvironmentClass::Park,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_indoor(self) -> bool {
        matches!(
            self,
            EnvironmentClass::Laboratory | EnvironmentClass::Office | EnvironmentClass::Corridor
        )
    }

    /// Rician K-factor (linear) of off-body links.
    pub fn k_factor(self) -> f64 {
        match self {
            EnvironmentClass::Corridor => 1.0,
            EnvironmentClass::Laboratory => 2.0,
            EnvironmentClass::Office => 3.0,
            EnvironmentClass::Rooftop => 6.0,
            EnvironmentClass::Park => 8.0,
        }
    }

    pub fn noise_floor_dbm(self) -> f64 {
        match self {
            EnvironmentClass::Laboratory => -95.0,
            EnvironmentClass::Office => -95.0,
            EnvironmentClass::Corridor => -96.0,
            EnvironmentClass::Rooftop => -100.0,
            EnvironmentClass::Park => -101.0,
        }
    }

    /// Log-normal shadowing standard deviation in dB.
    pub fn shadowing_db(self) -> f64 {
        if self.is_indoor() {
            4.0
        } else {
            2.0
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvironmentClass::Laboratory => "laboratory",
            EnvironmentClass::Office => "office",
            EnvironmentClass::Corridor => "corridor",
            EnvironmentClass::Rooftop => "rooftop",
            EnvironmentClass::Park => "park",
        }
    }
}

/// A labeled RSS recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RssTrace {
    pub signal: Signal,
    pub y: BodyLabel,
    pub z: MotionClass,
    pub v: EnvironmentClass,
    pub seed: u64,
}

fn check_duration(duration_s: f64) -> crate::Result<usize> {
    if !(duration_s >= MIN_DURATION_S) {
        return Err(crate::Error::InvalidParameter(format!(
            "trace duration {duration_s} s is shorter than one {MIN_DURATION_S} s segment"
        )));
    }
    Ok((duration_s * crate::dsp::SAMPLE_RATE_HZ).round() as usize)
}

/// Receiver model: returns the reported RSS in dBm for a received complex
/// amplitude `(re, im)` in sqrt(mW) and a noise floor in dBm.
fn measure_rss(rng: &mut Rng, re: f64, im: f64, noise_floor_dbm: f64) -> f64 {
    let noise_mw = libm::pow(10.0, noise_floor_dbm / 10.0);
    let sigma = libm::sqrt(noise_mw / 2.0);
    let mut power = 0.0;
    for _ in 0..RAW_SAMPLES_PER_READING {
        let nr = re + sigma * gaussian(rng);
        let ni = im + sigma * gaussian(rng);
        power += nr * nr + ni * ni;
    }
    power /= RAW_SAMPLES_PER_READING as f64;
    (10.0 * libm::log10(power)).clamp(RSS_FLOOR_DBM, RSS_CEIL_DBM)
}

#[doc(hidden)]
pub mod test_support {
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    pub fn variance(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
    }

    /// Share of the mean-removed power spectrum above `cut_hz`.
    pub fn high_band_fraction(x: &[f64], fs: f64, cut_hz: f64) -> f64 {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (mut hi, mut total) = (0.0, 0.0);
        for (k, c) in buf[..=n / 2].iter().enumerate() {
            let p = c.norm_sqr();
            total += p;
            if k as f64 * fs / n as f64 > cut_hz {
                hi += p;
            }
        }
        hi / total
    }

    /// Frequency of the largest non-DC bin.
    pub fn dominant_frequency(x: &[f64], fs: f64) -> f64 {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (k, _) = buf[1..=n / 2]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        (k + 1) as f64 * fs / n as f64
    }
}
