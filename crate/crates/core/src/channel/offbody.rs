//! Off-body propagation: log-distance path loss over a wandering attacker
//! with log-normal shadowing and Rician small-scale fading.

use std::f64::consts::TAU;

use crate::dsp::{Signal, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::rng::{self, gaussian, uniform, Rng};

use super::{check_duration, measure_rss, wavelength, BodyLabel, EnvironmentClass, MotionClass, RssTrace};

/// Attacker distance to the user, m.
pub const DEFAULT_ATTACKER_RANGE_M: (f64, f64) = (1.0, 5.0);

/// Off-body path-loss exponent (line-of-sight dominated).
pub const OFFBODY_PATH_LOSS_EXPONENT: f64 = 2.0;

/// Pedestrian speed cap, m/s.
pub const MAX_WALKING_SPEED: f64 = 1.5;

const FADING_SINUSOIDS: usize = 32;

/// Extra Doppler spread of the diffuse paths from moving scatterers (people,
/// the attacker's own hand), Hz.
pub const SCATTERER_DOPPLER_HZ: f64 = 40.0;

/// Free-space path loss at the 1 m reference distance.
fn reference_loss_db() -> f64 {
    20.0 * libm::log10(4.0 * std::f64::consts::PI / wavelength())
}

/// Attacker range over time: a speed-limited Ornstein-Uhlenbeck velocity
/// integrated into a distance that reflects off the range limits.
fn distance_walk(rng: &mut Rng, n: usize, fs: f64, range: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = range;
    let dt = 1.0 / fs;
    let theta = 0.5;
    let sigma = 0.6;
    let mut d = uniform(rng, lo, hi);
    let mut vel = 0.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(d);
        vel += -theta * vel * dt + sigma * libm::sqrt(dt) * gaussian(rng);
        vel = vel.clamp(-MAX_WALKING_SPEED, MAX_WALKING_SPEED);
        d += vel * dt;
        if d < lo {
            d = 2.0 * lo - d;
            vel = -vel;
        } else if d > hi {
            d = 2.0 * hi - d;
            vel = -vel;
        }
        d = d.clamp(lo, hi);
    }
    out
}

/// Rician fading: a line-of-sight phasor plus a Gaussian-weighted sum of
/// sinusoids with Clarke-distributed Doppler shifts. Mean power is 1.
struct RicianFading {
    los_amp: f64,
    los_freq: f64,
    los_phase: f64,
    diffuse: Vec<(f64, f64, f64, f64)>,
}

impl RicianFading {
    fn new(rng: &mut Rng, k_factor: f64, doppler_hz: f64, diffuse_doppler_hz: f64) -> Self {
        let diffuse_scale = libm::sqrt(1.0 / ((k_factor + 1.0) * FADING_SINUSOIDS as f64 * 2.0));
        let diffuse = (0..FADING_SINUSOIDS)
            .map(|_| {
                let a = gaussian(rng) * diffuse_scale;
                let b = gaussian(rng) * diffuse_scale;
                let freq = diffuse_doppler_hz * libm::cos(uniform(rng, 0.0, TAU));
                let phase = uniform(rng, 0.0, TAU);
                (a, b, freq, phase)
            })
            .collect();
        RicianFading {
            los_amp: libm::sqrt(k_factor / (k_factor + 1.0)),
            los_freq: doppler_hz * libm::cos(uniform(rng, 0.0, TAU)),
            los_phase: uniform(rng, 0.0, TAU),
            diffuse,
        }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let arg = TAU * self.los_freq * t + self.los_phase;
        let mut re = self.los_amp * libm::cos(arg);
        let mut im = self.los_amp * libm::sin(arg);
        for &(a, b, freq, phase) in &self.diffuse {
            let arg = TAU * freq * t + phase;
            let (s, c) = (libm::sin(arg), libm::cos(arg));
            re += a * c - b * s;
            im += a * s + b * c;
        }
        (re, im)
    }
}

/// Synthesizes an off-body trace: an attacker walking within
/// `attacker_range_m` of the user in `env`.
///
/// The attacker's transmit power is drawn per trace so that off-body mean
/// levels overlap the on-body range; absolute level carries no label
/// information. The motion label is fixed to walking.
pub fn gen_offbody_trace(
    env: EnvironmentClass,
    attacker_range_m: (f64, f64),
    duration_s: f64,
    seed: u64,
) -> Result<RssTrace> {
    let n = check_duration(duration_s)?;
    let (lo, hi) = attacker_range_m;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "attacker range [{lo}, {hi}] m must satisfy 0 < lo < hi"
        )));
    }
    let fs = SAMPLE_RATE_HZ;
    let mut rng = rng::stream(seed, 0);
    let p_tx_dbm = uniform(&mut rng, -25.0, -5.0);
    let shadow_db = env.shadowing_db() * gaussian(&mut rng);
    let speed = uniform(&mut rng, 0.5, MAX_WALKING_SPEED);
    let doppler = speed / wavelength();
    let fading = RicianFading::new(&mut rng::stream(seed, 1), env.k_factor(), doppler, doppler + SCATTERER_DOPPLER_HZ);
    let distance = distance_walk(&mut rng::stream(seed, 2), n, fs, (lo, hi));
    let mut noise_rng = rng::stream(seed, 3);
    let pl0 = reference_loss_db();

    let samples = distance
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mean_dbm = p_tx_dbm - pl0
                - 10.0 * OFFBODY_PATH_LOSS_EXPONENT * libm::log10(d)
                + shadow_db;
            let amp = libm::pow(10.0, mean_dbm / 20.0);
            let (hr, hi) = fading.at(i as f64 / fs);
            measure_rss(&mut noise_rng, amp * hr, amp * hi, env.noise_floor_dbm())
        })
        .collect();
    Ok(RssTrace {
        signal: Signal::new(samples, fs)?,
        y: BodyLabel::Off,
        z: MotionClass::Walking,
        v: env,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{gen_onbody_trace, RSS_CEIL_DBM, RSS_FLOOR_DBM};
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = gen_offbody_trace(EnvironmentClass::Office, DEFAULT_ATTACKER_RANGE_M, 10.0, 42).unwrap();
        let b = gen_offbody_trace(EnvironmentClass::Office, DEFAULT_ATTACKER_RANGE_M, 10.0, 42).unwrap();
        let bits = |t: &RssTrace| t.signal.samples().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.y, BodyLabel::Off);
        assert_eq!(a.z, MotionClass::Walking);
    }

    #[test]
    fn rejects_short_duration_and_bad_range() {
        assert!(gen_offbody_trace(EnvironmentClass::Park, DEFAULT_ATTACKER_RANGE_M, 4.9, 1).is_err());
        assert!(gen_offbody_trace(EnvironmentClass::Park, (5.0, 1.0), 10.0, 1).is_err());
    }

    #[test]
    fn distance_stays_in_range() {
        let d = distance_walk(&mut rng::stream(1, 0), 30_000, SAMPLE_RATE_HZ, (1.0, 5.0));
        assert!(d.iter().all(|&x| (1.0..=5.0).contains(&x)));
        let max_step = d.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_step <= MAX_WALKING_SPEED / SAMPLE_RATE_HZ + 1e-12);
    }

    #[test]
    fn fading_has_unit_mean_power() {
        let mut total = 0.0;
        let seeds = 200;
        for s in 0..seeds {
            let f = RicianFading::new(&mut rng::stream(s, 0), 3.0, 10.0, 10.0);
            let (re, im) = f.at(0.37);
            total += re * re + im * im;
        }
        let mean = total / seeds as f64;
        assert!((mean - 1.0).abs() < 0.15, "mean power {mean}");
    }

    #[test]
    fn offbody_is_noisier_at_high_frequency_than_standing() {
        for seed in 0..5 {
            let off = gen_offbody_trace(EnvironmentClass::Office, DEFAULT_ATTACKER_RANGE_M, 60.0, seed).unwrap();
            let on = gen_onbody_trace(MotionClass::Standing, EnvironmentClass::Office, 60.0, seed).unwrap();
            let f_off = high_band_fraction(off.signal.samples(), SAMPLE_RATE_HZ, 15.0);
            let f_on = high_band_fraction(on.signal.samples(), SAMPLE_RATE_HZ, 15.0);
            assert!(f_off > f_on, "seed {seed}: off {f_off} on {f_on}");
            assert!(variance(on.signal.samples()) < variance(off.signal.samples()));
        }
    }

    #[test]
    fn values_within_receiver_range() {
        for env in EnvironmentClass::ALL {
            let t = gen_offbody_trace(env, DEFAULT_ATTACKER_RANGE_M, 20.0, 9).unwrap();
            assert!(t
                .signal
                .samples()
                .iter()
                .all(|&x| x.is_finite() && (RSS_FLOOR_DBM..=RSS_CEIL_DBM).contains(&x)));
        }
    }
}
