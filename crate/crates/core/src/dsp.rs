//! Signal-processing primitives shared by the feature pipeline and the
//! channel simulator: windowed-sinc FIR design, zero-delay filtering,
//! one-sided FFT magnitudes and six-number chunk statistics.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// RSS sampling rate used throughout the crate.
pub const SAMPLE_RATE_HZ: f64 = 500.0;

/// Default FIR length at 500 Hz.
pub const DEFAULT_TAPS: usize = 501;

/// Edge between the large-scale and motion bands.
pub const LOW_CUTOFF_HZ: f64 = 0.5;

/// Edge between the motion and small-scale bands.
pub const HIGH_CUTOFF_HZ: f64 = 15.0;

/// A uniformly sampled real-valued sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample {i} is not finite"
            )));
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    /// Signal at the crate-wide 500 Hz rate.
    pub fn at_default_rate(samples: Vec<f64>) -> Result<Self> {
        Signal::new(samples, SAMPLE_RATE_HZ)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    LowPass,
    BandPass,
    HighPass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    taps: Vec<f64>,
    band: Band,
    low_hz: f64,
    high_hz: f64,
    sample_rate: f64,
}

impl FilterKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn band(&self) -> Band {
        self.band
    }

    /// Cutoffs `(low, high)` in Hz. A low-pass kernel stores its cutoff in
    /// `low`; a high-pass kernel stores its cutoff in `high`.
    pub fn cutoffs(&self) -> (f64, f64) {
        (self.low_hz, self.high_hz)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Magnitude of the kernel's frequency response at `freq_hz`.
    pub fn response_at(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, &h)| {
                let a = w * n as f64;
                (re + h * a.cos(), im - h * a.sin())
            });
        (re * re + im * im).sqrt()
    }
}

/// Unit-DC-gain Hamming-windowed sinc low-pass.
fn lowpass_taps(cutoff_hz: f64, taps: usize, fs: f64) -> Vec<f64> {
    let m = (taps - 1) as f64 / 2.0;
    let fc = cutoff_hz / fs;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - m;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    // Exact symmetry regardless of rounding in the trig evaluations.
    for i in 0..taps / 2 {
        let avg = 0.5 * (h[i] + h[taps - 1 - i]);
        h[i] = avg;
        h[taps - 1 - i] = avg;
    }
    h
}

/// Designs a linear-phase windowed-sinc FIR kernel.
///
/// The three bands are built from the same low-pass prototype: band-pass is
/// `lp(high) - lp(low)` and high-pass is `delta - lp(high)`. With matching
/// cutoffs, `low + band + high` is therefore the identity filter.
///
/// For `Band::LowPass` only `low_hz` is used, for `Band::HighPass` only
/// `high_hz`.
pub fn design_fir(band: Band, low_hz: f64, high_hz: f64, taps: usize, fs: f64) -> Result<FilterKernel> {
    if taps.is_multiple_of(2) || taps < 3 {
        return Err(Error::InvalidFilter(format!(
            "tap count must be odd and at least 3, got {taps}"
        )));
    }
    if !(fs > 0.0) {
        return Err(Error::InvalidFilter(format!("sample rate {fs}")));
    }
    let nyquist = fs / 2.0;
    let in_range = |f: f64| f > 0.0 && f < nyquist;
    let taps_vec = match band {
        Band::LowPass => {
            if !in_range(low_hz) {
                return Err(Error::InvalidFilter(format!(
                    "low-pass cutoff {low_hz} Hz outside (0, {nyquist})"
                )));
            }
            lowpass_taps(low_hz, taps, fs)
        }
        Band::HighPass => {
            if !in_range(high_hz) {
                return Err(Error::InvalidFilter(format!(
                    "high-pass cutoff {high_hz} Hz outside (0, {nyquist})"
                )));
            }
            let mut h: Vec<f64> = lowpass_taps(high_hz, taps, fs).iter().map(|v| -v).collect();
            h[(taps - 1) / 2] += 1.0;
            h
        }
        Band::BandPass => {
            if !(in_range(low_hz) && in_range(high_hz) && low_hz < high_hz) {
                return Err(Error::InvalidFilter(format!(
                    "band-pass edges must satisfy 0 < low < high < {nyquist}, got [{low_hz}, {high_hz}]"
                )));
            }
            let lo = lowpass_taps(low_hz, taps, fs);
            lowpass_taps(high_hz, taps, fs)
                .iter()
                .zip(&lo)
                .map(|(h, l)| h - l)
                .collect()
        }
    };
    Ok(FilterKernel {
        taps: taps_vec,
        band,
        low_hz,
        high_hz,
        sample_rate: fs,
    })
}

/// Filters `signal` with `kernel`, returning a same-length output with the
/// `(taps - 1) / 2` sample group delay removed. Edges are extended by
/// reflection (without repeating the boundary sample).
pub fn apply_filter(signal: &Signal, kernel: &FilterKernel) -> Result<Signal> {
    let x = signal.samples();
    let n = kernel.len();
    if x.len() < n {
        return Err(Error::TooShort {
            got: x.len(),
            need: n,
        });
    }
    let half = (n - 1) / 2;
    let len = x.len();
    let mut padded = Vec::with_capacity(len + 2 * half);
    padded.extend((1..=half).rev().map(|i| x[i]));
    padded.extend_from_slice(x);
    padded.extend((1..=half).map(|i| x[len - 1 - i]));

    let taps = kernel.taps();
    let out = (0..len)
        .map(|i| {
            padded[i..i + n]
                .iter()
                .zip(taps.iter().rev())
                .fold(0.0, |acc, (a, b)| acc + a * b)
        })
        .collect();
    Signal::new(out, signal.sample_rate())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    magnitudes: Vec<f64>,
    bin_width: f64,
}

impl Spectrum {
    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(size: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(size))
}

/// One-sided magnitude spectrum `|X[k]|`, `k = 0..=fft_size/2`, of an
/// unwindowed, unnormalized DFT.
pub fn fft_magnitude(window: &Signal, fft_size: usize) -> Result<Spectrum> {
    if window.len() != fft_size {
        return Err(Error::LengthMismatch {
            expected: fft_size,
            got: window.len(),
        });
    }
    if fft_size == 0 {
        return Err(Error::Empty("fft window"));
    }
    let mut buf: Vec<Complex<f64>> = window
        .samples()
        .iter()
        .map(|&s| Complex::new(s, 0.0))
        .collect();
    plan(fft_size).process(&mut buf);
    let magnitudes = buf[..=fft_size / 2].iter().map(|c| c.norm()).collect();
    Ok(Spectrum {
        magnitudes,
        bin_width: window.sample_rate() / fft_size as f64,
    })
}

/// Six summary statistics of a chunk, in feature order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats6 {
    pub max: f64,
    pub min: f64,
    pub median: f64,
    pub variance: f64,
    pub kurtosis: f64,
    pub skewness: f64,
}

impl Stats6 {
    pub fn to_array(self) -> [f64; 6] {
        [
            self.max,
            self.min,
            self.median,
            self.variance,
            self.kurtosis,
            self.skewness,
        ]
    }
}

/// Below this population variance kurtosis and skewness are reported as 0.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Max, min, median, population variance, (non-excess) kurtosis and
/// skewness of `chunk`.
pub fn stats6(chunk: &[f64]) -> Result<Stats6> {
    if chunk.is_empty() {
        return Err(Error::Empty("statistics chunk"));
    }
    let n = chunk.len() as f64;
    let mut sorted = chunk.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len();
    let median = if len % 2 == 1 {
        sorted[len / 2]
    } else {
        0.5 * (sorted[len / 2 - 1] + sorted[len / 2])
    };
    // Moments are summed in sorted order so the result does not depend on
    // the order of the input.
    let mean = sorted.iter().sum::<f64>() / n;
    let (m2, m3, m4) = sorted.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &x| {
        let d = x - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d, c + d2 * d2)
    });
    let variance = m2 / n;
    let (kurtosis, skewness) = if variance < DEGENERATE_VARIANCE {
        (0.0, 0.0)
    } else {
        (
            (m4 / n) / (variance * variance),
            (m3 / n) / variance.powf(1.5),
        )
    };
    Ok(Stats6 {
        max: sorted[len - 1],
        min: sorted[0],
        median,
        variance,
        kurtosis,
        skewness,
    })
}
