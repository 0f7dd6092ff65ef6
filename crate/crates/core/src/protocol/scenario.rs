//! Timed scripts of device frames, run against a gateway to produce a
//! transcript.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{BodyLabel, EnvironmentClass, MotionClass, DEFAULT_ATTACKER_RANGE_M};
use crate::error::{Error, Result};
use crate::io::{read_json, read_jsonl, write_json, write_jsonl};
use crate::profile::SEGMENT_SAMPLES;
use crate::rng::derive_seed;

use super::{GatewayState, Message, MessageKind, TraceRef, Transition, Verifier};

/// One scripted frame: `{t, kind, claimed, actual}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub t: f64,
    pub kind: MessageKind,
    pub claimed: String,
    pub actual: String,
}

impl ScriptEvent {
    pub fn new(t: f64, kind: MessageKind, claimed: &str, actual: &str) -> Self {
        ScriptEvent { t, kind, claimed: claimed.into(), actual: actual.into() }
    }
}

/// Physical setting in which a script is played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Devices worn on the body; every other transmitter is off-body.
    pub on_body: Vec<String>,
    pub motion: MotionClass,
    pub environment: EnvironmentClass,
    /// 5 s segments per empty-packet burst.
    pub burst_segments: usize,
    pub attacker_range_m: (f64, f64),
    /// Logical-time limit on pending phases; `None` waits forever.
    pub timeout: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            on_body: vec!["wearable".into()],
            motion: MotionClass::Walking,
            environment: EnvironmentClass::Office,
            burst_segments: 1,
            attacker_range_m: DEFAULT_ATTACKER_RANGE_M,
            timeout: None,
        }
    }
}

fn check_script(script: &[ScriptEvent]) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for (i, e) in script.iter().enumerate() {
        if !e.t.is_finite() || e.t < last {
            return Err(Error::MalformedScenario(format!("event {i}: time {} is not finite and non-decreasing", e.t)));
        }
        if e.claimed.is_empty() || e.actual.is_empty() {
            return Err(Error::MalformedScenario(format!("event {i}: empty device id")));
        }
        last = e.t;
    }
    Ok(())
}

/// Plays `script` against a fresh gateway.
///
/// The burst at script index `i` observes a trace generated with sub-seed
/// `derive_seed(seed, i)`, on-body exactly when its physical sender is listed
/// in `cfg.on_body`.
pub fn run_scenario(script: &[ScriptEvent], verifier: &dyn Verifier, cfg: &ScenarioConfig, seed: u64) -> Result<Vec<Transition>> {
    check_script(script)?;
    if cfg.burst_segments == 0 {
        return Err(Error::InvalidParameter("burst_segments must be at least 1".into()));
    }
    let duration_s = (cfg.burst_segments * SEGMENT_SAMPLES) as f64 / crate::dsp::SAMPLE_RATE_HZ;
    let mut gw = GatewayState::with_timeout(cfg.timeout);
    let mut out = Vec::with_capacity(script.len());
    for (i, e) in script.iter().enumerate() {
        if let Some(tr) = gw.expire(e.t) {
            out.push(tr);
        }
        let mut msg = Message::new(e.kind, &e.claimed, &e.actual);
        if e.kind == MessageKind::EmptyPacketBurst {
            let y = if cfg.on_body.contains(&e.actual) { BodyLabel::On } else { BodyLabel::Off };
            msg.trace = Some(TraceRef {
                seed: derive_seed(seed, i as u64),
                y,
                z: cfg.motion,
                v: cfg.environment,
                duration_s,
                attacker_range_m: cfg.attacker_range_m,
            });
        }
        out.push(gw.step(e.t, msg, verifier));
    }
    Ok(out)
}

/// Association request followed by the device's own burst.
pub fn handshake_script(device: &str) -> Vec<ScriptEvent> {
    vec![
        ScriptEvent::new(0.0, MessageKind::AssocRequest, device, device),
        ScriptEvent::new(1.0, MessageKind::EmptyPacketBurst, device, device),
    ]
}

/// Attacker requests association under the victim's id and answers the
/// challenge with its own burst.
pub fn spoofing_script(victim: &str, attacker: &str) -> Vec<ScriptEvent> {
    vec![
        ScriptEvent::new(0.0, MessageKind::AssocRequest, victim, attacker),
        ScriptEvent::new(1.0, MessageKind::EmptyPacketBurst, victim, attacker),
    ]
}

/// Victim associates and sends data; attacker then forges a
/// re-authentication request, the victim denies it, and the attacker's burst
/// is checked.
pub fn deadlock_script(victim: &str, attacker: &str) -> Vec<ScriptEvent> {
    let mut s = handshake_script(victim);
    s.extend([
        ScriptEvent::new(2.0, MessageKind::DataFrame, victim, victim),
        ScriptEvent::new(3.0, MessageKind::AuthRequest, victim, attacker),
        ScriptEvent::new(4.0, MessageKind::DeviceDenialChallenge, victim, victim),
        ScriptEvent::new(5.0, MessageKind::EmptyPacketBurst, victim, attacker),
        ScriptEvent::new(6.0, MessageKind::DataFrame, victim, victim),
    ]);
    s
}

pub fn read_script(path: &Path) -> Result<Vec<ScriptEvent>> {
    let script: Vec<ScriptEvent> = read_json(path)?;
    check_script(&script)?;
    Ok(script)
}

pub fn write_script(path: &Path, script: &[ScriptEvent]) -> Result<()> {
    write_json(path, script)
}

pub fn write_transcript(path: &Path, transcript: &[Transition]) -> Result<()> {
    write_jsonl(path, transcript)
}

pub fn read_transcript(path: &Path) -> Result<Vec<Transition>> {
    read_jsonl(path)
}
