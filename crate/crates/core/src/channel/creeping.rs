//! On-body propagation: creeping-wave field strength along the body surface
//! and the motion-driven surface attenuation that modulates it.

use std::f64::consts::{PI, TAU};

use rand::Rng as _;

use crate::dsp::{Signal, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::rng::{self, uniform, Rng};

use super::{
    check_duration, measure_rss, wavelength, BodyLabel, EnvironmentClass, MotionClass, RssTrace,
    ETA_0,
};

/// Geometry and radio parameters of an on-body creeping-wave link.
///
/// The ellipse axes and the exit/trapping angles describe the surface path;
/// their combined loss enters [`creeping_field_magnitude`] as a single
/// attenuation factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreepingWaveParams {
    /// Tx-Rx surface distance, m.
    pub d: f64,
    /// Wave impedance, ohm.
    pub eta: f64,
    /// Transmit power, W.
    pub p_tx: f64,
    /// Tx antenna gain (linear).
    pub g_tx: f64,
    /// Free-space wave number, rad/m.
    pub k: f64,
    /// Semi-major axis of the body cross-section ellipse, m.
    pub a: f64,
    /// Semi-minor axis, m.
    pub b: f64,
    /// Exit-point angle at Tx, rad.
    pub phi: f64,
    /// Trapping-point angle at Rx, rad.
    pub varphi: f64,
}

impl CreepingWaveParams {
    /// Waist-to-hand link at 2.4 GHz with a typical torso cross-section.
    pub fn waist_to_hand(d: f64, p_tx: f64) -> Self {
        CreepingWaveParams {
            d,
            eta: ETA_0,
            p_tx,
            g_tx: 1.0,
            k: TAU / wavelength(),
            a: 0.18,
            b: 0.11,
            phi: PI / 2.0,
            varphi: PI / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::InvalidParameter(format!("distance d = {} must be positive", self.d)));
        }
        if !(self.p_tx > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transmit power {} W must be positive",
                self.p_tx
            )));
        }
        if !(self.g_tx > 0.0 && self.eta > 0.0 && self.k > 0.0) {
            return Err(Error::InvalidParameter("gain, impedance and wave number must be positive".into()));
        }
        if !(self.b > 0.0 && self.a >= self.b) {
            return Err(Error::InvalidParameter(format!(
                "ellipse axes must satisfy a >= b > 0, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// Magnitude of the creeping-wave surface field,
/// `|E| = 2 sqrt(eta / 2 pi) sqrt(P_tx G_tx) / d * attenuation`.
///
/// The propagation phase `exp(-jkd)` has unit modulus and drops out.
pub fn creeping_field_magnitude(p: &CreepingWaveParams, attenuation: f64) -> Result<f64> {
    p.validate()?;
    if !(attenuation > 0.0 && attenuation <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "attenuation {attenuation} outside (0, 1]"
        )));
    }
    Ok(2.0 * libm::sqrt(p.eta / TAU) * libm::sqrt(p.p_tx * p.g_tx) / p.d * attenuation)
}

/// Power in dBm collected by an isotropic receiving antenna from a field of
/// magnitude `e_v_per_m`.
pub fn field_to_dbm(e_v_per_m: f64, eta: f64) -> f64 {
    let lambda = wavelength();
    let aperture = lambda * lambda / (4.0 * PI);
    10.0 * libm::log10(e_v_per_m * e_v_per_m / eta * aperture * 1e3)
}

/// Surface loss at rest, before motion modulation.
const BASE_SURFACE_LOSS_DB: f64 = -20.0;
/// Largest upward excursion allowed, keeping the attenuation at or below 1.
const MAX_MODULATION_DB: f64 = -BASE_SURFACE_LOSS_DB - 0.01;

struct Tone {
    freq: f64,
    amp_db: f64,
    phase: f64,
}

fn eval_tones(tones: &[Tone], t: f64) -> f64 {
    tones
        .iter()
        .map(|tn| tn.amp_db * libm::sin(TAU * tn.freq * t + tn.phase))
        .sum()
}

/// Breathing and postural sway: slow, sub-0.5 Hz, well under 0.5 dB RMS.
fn rest_tones(rng: &mut Rng, motion: MotionClass) -> Vec<Tone> {
    let breath_amp = if motion == MotionClass::Sitting {
        uniform(rng, 0.08, 0.2)
    } else {
        uniform(rng, 0.1, 0.25)
    };
    let mut tones = vec![Tone {
        freq: uniform(rng, 0.2, 0.33),
        amp_db: breath_amp,
        phase: uniform(rng, 0.0, TAU),
    }];
    for _ in 0..6 {
        tones.push(Tone {
            freq: uniform(rng, 0.02, 0.4),
            amp_db: 0.06,
            phase: uniform(rng, 0.0, TAU),
        });
    }
    tones
}

/// Fundamental frequency and harmonic amplitudes (dB) of a dynamic motion.
fn gait(motion: MotionClass) -> (f64, [f64; 3]) {
    match motion {
        MotionClass::Walking => (2.0, [4.5, 2.0, 1.0]),
        MotionClass::ArmMoving => (1.0, [5.0, 1.8, 0.7]),
        MotionClass::Rotating => (0.5, [5.5, 2.2, 0.8]),
        _ => unreachable!("not a dynamic motion"),
    }
}

const JITTER_TONES: usize = 24;
/// Amplitude of each jitter tone; 24 tones give 1 dB RMS.
const JITTER_AMP_DB: f64 = 0.288_675_134_594_812_9;

fn motion_tones(rng: &mut Rng, motion: MotionClass) -> Vec<Tone> {
    let mut tones = rest_tones(rng, motion);
    if motion.is_static() {
        return tones;
    }
    let (f0, harmonics) = gait(motion);
    let cadence = f0 * uniform(rng, 0.92, 1.08);
    let scale = uniform(rng, 0.9, 1.3);
    for (h, amp) in harmonics.iter().enumerate() {
        tones.push(Tone {
            freq: cadence * (h + 1) as f64,
            amp_db: amp * scale,
            phase: uniform(rng, 0.0, TAU),
        });
    }
    for _ in 0..JITTER_TONES {
        tones.push(Tone {
            freq: uniform(rng, 0.5, 15.0),
            amp_db: JITTER_AMP_DB,
            phase: uniform(rng, 0.0, TAU),
        });
    }
    tones
}

/// Motion-induced modulation in dB for a controlled motion.
fn controlled_modulation(motion: MotionClass, n: usize, fs: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::rng_from_seed(seed);
    let tones = motion_tones(&mut rng, motion);
    (0..n).map(|i| eval_tones(&tones, i as f64 / fs)).collect()
}

const CROSSFADE_S: f64 = 0.5;

/// Free motion: a sequence of controlled motions, each held for 5-15 s,
/// with a linear crossfade across each switch.
fn uncontrolled_modulation(n: usize, fs: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, 0);
    let mut bounds = vec![0usize];
    let mut pieces = Vec::new();
    let mut piece_index = 1u64;
    while *bounds.last().unwrap() < n {
        let motion = MotionClass::CONTROLLED[rng.random_range(0..5usize)];
        let len = (uniform(&mut rng, 5.0, 15.0) * fs) as usize;
        pieces.push(controlled_modulation(motion, n, fs, rng::derive_seed(seed, piece_index)));
        piece_index += 1;
        bounds.push(bounds.last().unwrap() + len);
    }
    let half = (CROSSFADE_S * fs / 2.0) as usize;
    let mut out = Vec::with_capacity(n);
    let mut p = 0;
    for i in 0..n {
        while i >= bounds[p + 1] {
            p += 1;
        }
        let mut value = pieces[p][i];
        // Blend with the neighbouring piece within `half` samples of a switch.
        if p + 1 < pieces.len() && i + half > bounds[p + 1] {
            let w = (i + half - bounds[p + 1]) as f64 / (2 * half) as f64;
            value = (1.0 - w) * value + w * pieces[p + 1][i];
        } else if p > 0 && i < bounds[p] + half {
            let w = (bounds[p] + half - i) as f64 / (2 * half) as f64;
            value = (1.0 - w) * value + w * pieces[p - 1][i];
        }
        out.push(value);
    }
    out
}

/// Surface attenuation trajectory in (0, 1] for `n` samples at `fs` Hz.
///
/// Static motions produce slow breathing/sway perturbations; dynamic motions
/// add a periodic gait at a class-specific fundamental (walking 2 Hz, arm
/// moving 1 Hz, rotating 0.5 Hz) with two harmonics and 1 dB RMS of jitter
/// spread over 0.5-15 Hz.
pub fn attenuation_model(motion: MotionClass, n: usize, fs: f64, seed: u64) -> Vec<f64> {
    let modulation = if motion.is_controlled() {
        controlled_modulation(motion, n, fs, seed)
    } else {
        uncontrolled_modulation(n, fs, seed)
    };
    modulation
        .into_iter()
        .map(|m| libm::pow(10.0, (BASE_SURFACE_LOSS_DB + m.min(MAX_MODULATION_DB)) / 20.0))
        .collect()
}

/// Synthesizes an on-body trace for a user performing `motion` in `env`.
///
/// Per trace, the Tx-Rx surface distance, transmit power and an extra
/// placement loss are drawn from the seed; the surface attenuation follows
/// [`attenuation_model`], and the distance dependence of the surface loss,
/// `(0.1 m / d)`, makes the on-body power decay as `d^-4`.
pub fn gen_onbody_trace(
    motion: MotionClass,
    env: EnvironmentClass,
    duration_s: f64,
    seed: u64,
) -> Result<RssTrace> {
    let n = check_duration(duration_s)?;
    let fs = SAMPLE_RATE_HZ;
    let mut rng = rng::stream(seed, 0);
    let d = uniform(&mut rng, 0.35, 0.7);
    let p_tx_dbm = uniform(&mut rng, -5.0, 5.0);
    let placement_loss_db = uniform(&mut rng, 0.0, 10.0);
    let params = CreepingWaveParams::waist_to_hand(d, libm::pow(10.0, p_tx_dbm / 10.0) * 1e-3);
    let placement = (0.1 / d) * libm::pow(10.0, -placement_loss_db / 20.0);

    let attenuation = attenuation_model(motion, n, fs, rng::derive_seed(seed, 1));
    let mut noise_rng = rng::stream(seed, 2);
    let samples = attenuation
        .iter()
        .map(|&att| {
            let e = creeping_field_magnitude(&params, att * placement)?;
            let amp = libm::pow(10.0, field_to_dbm(e, params.eta) / 20.0);
            Ok(measure_rss(&mut noise_rng, amp, 0.0, env.noise_floor_dbm()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RssTrace {
        signal: Signal::new(samples, fs)?,
        y: BodyLabel::On,
        z: motion,
        v: env,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_params() -> CreepingWaveParams {
        CreepingWaveParams {
            d: 1.0,
            eta: TAU,
            p_tx: 1.0,
            g_tx: 1.0,
            k: 50.0,
            a: 0.2,
            b: 0.1,
            phi: 0.0,
            varphi: 0.0,
        }
    }

    fn db(e: f64) -> f64 {
        20.0 * e.log10()
    }

    #[test]
    fn field_collapses_to_two() {
        assert_abs_diff_eq!(creeping_field_magnitude(&unit_params(), 1.0).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn doubling_distance_costs_six_db() {
        let near = creeping_field_magnitude(&unit_params(), 1.0).unwrap();
        let far = creeping_field_magnitude(&CreepingWaveParams { d: 2.0, ..unit_params() }, 1.0).unwrap();
        assert_abs_diff_eq!(far, near / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(db(near) - db(far), 6.02, epsilon = 0.01);
    }

    #[test]
    fn halving_attenuation_costs_six_db() {
        let full = creeping_field_magnitude(&unit_params(), 1.0).unwrap();
        let half = creeping_field_magnitude(&unit_params(), 0.5).unwrap();
        // 20 log10(2) = 6.0206
        assert_abs_diff_eq!(db(full) - db(half), 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn invalid_field_parameters() {
        assert!(creeping_field_magnitude(&CreepingWaveParams { d: 0.0, ..unit_params() }, 1.0).is_err());
        assert!(creeping_field_magnitude(&CreepingWaveParams { p_tx: -1.0, ..unit_params() }, 1.0).is_err());
        assert!(creeping_field_magnitude(&unit_params(), 0.0).is_err());
        assert!(creeping_field_magnitude(&unit_params(), 1.5).is_err());
    }

    fn trajectory_db(motion: MotionClass, seed: u64) -> Vec<f64> {
        attenuation_model(motion, 30_000, SAMPLE_RATE_HZ, seed)
            .iter()
            .map(|a| 20.0 * a.log10())
            .collect()
    }

    #[test]
    fn attenuation_stays_in_unit_interval() {
        for motion in MotionClass::ALL {
            let a = attenuation_model(motion, 5000, SAMPLE_RATE_HZ, 3);
            assert!(a.iter().all(|&x| x > 0.0 && x <= 1.0), "{motion:?}");
        }
    }

    #[test]
    fn static_motion_is_quieter_than_walking() {
        for seed in 0..10 {
            let sit = variance(&trajectory_db(MotionClass::Sitting, seed));
            let stand = variance(&trajectory_db(MotionClass::Standing, seed));
            let walk = variance(&trajectory_db(MotionClass::Walking, seed));
            assert!(sit.sqrt() <= 0.5 && stand.sqrt() <= 0.5);
            assert!(walk.sqrt() >= 3.0, "walking rms {}", walk.sqrt());
            assert!(sit < walk && stand < walk);
        }
    }

    #[test]
    fn dynamic_motions_exceed_three_db_rms() {
        for motion in [MotionClass::ArmMoving, MotionClass::Rotating, MotionClass::Walking] {
            for seed in 0..10 {
                assert!(variance(&trajectory_db(motion, seed)).sqrt() >= 3.0, "{motion:?} seed {seed}");
            }
        }
    }

    #[test]
    fn walking_peak_lies_in_motion_band() {
        for seed in 0..10 {
            let f = dominant_frequency(&trajectory_db(MotionClass::Walking, seed), SAMPLE_RATE_HZ);
            assert!((0.5..=15.0).contains(&f), "peak at {f} Hz");
            assert!((f - 2.0).abs() < 0.2);
        }
    }

    #[test]
    fn attenuation_is_deterministic() {
        for motion in MotionClass::ALL {
            assert_eq!(
                attenuation_model(motion, 3000, SAMPLE_RATE_HZ, 99),
                attenuation_model(motion, 3000, SAMPLE_RATE_HZ, 99)
            );
        }
    }

    #[test]
    fn onbody_walking_varies_more_than_standing() {
        for seed in 0..5 {
            let stand = gen_onbody_trace(MotionClass::Standing, EnvironmentClass::Office, 60.0, seed).unwrap();
            let walk = gen_onbody_trace(MotionClass::Walking, EnvironmentClass::Office, 60.0, seed).unwrap();
            assert_eq!(stand.signal.len(), 30_000);
            assert!(variance(walk.signal.samples()) > variance(stand.signal.samples()));
        }
    }

    #[test]
    fn onbody_rejects_short_duration() {
        assert!(gen_onbody_trace(MotionClass::Sitting, EnvironmentClass::Park, 3.0, 1).is_err());
    }
}
