//! Gateway state machine for the two cross-layer mitigations: propagation
//! verification before association (spoofing), and challenge-based
//! verification of re-authentication requests (deadlock).
//!
//! The machine is total: an event that is not valid in the current state is
//! recorded as ignored and leaves the state untouched, so no frame sequence
//! can crash or wedge the gateway.

mod scenario;
mod verifier;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{gen_offbody_trace, gen_onbody_trace, BodyLabel, EnvironmentClass, MotionClass, RssTrace};
use crate::error::Result;

pub use scenario::{
    deadlock_script, handshake_script, read_script, read_transcript, run_scenario, spoofing_script,
    write_script, write_transcript, ScenarioConfig, ScriptEvent,
};
pub use verifier::{band_variance_statistic, LearnedVerifier, OracleVerifier, ThresholdVerifier, Verdict, Verifier};

/// Sender and addressee id of frames originated by the gateway.
pub const GATEWAY_ID: &str = "gateway";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    AssocRequest,
    VerifyAck,
    EmptyPacketBurst,
    AssocAccept,
    AssocDeny,
    AuthRequest,
    DeviceDenialChallenge,
    DropNotice,
    DataFrame,
}

/// Recipe for regenerating the RSS trace observed while a burst was
/// received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRef {
    pub seed: u64,
    pub y: BodyLabel,
    pub z: MotionClass,
    pub v: EnvironmentClass,
    pub duration_s: f64,
    pub attacker_range_m: (f64, f64),
}

impl TraceRef {
    pub fn generate(&self) -> Result<RssTrace> {
        match self.y {
            BodyLabel::On => gen_onbody_trace(self.z, self.v, self.duration_s, self.seed),
            BodyLabel::Off => Ok(RssTrace {
                z: self.z,
                ..gen_offbody_trace(self.v, self.attacker_range_m, self.duration_s, self.seed)?
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    /// Sender id written in the frame.
    pub claimed: String,
    /// Physical transmitter; differs from `claimed` when spoofed.
    pub actual: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceRef>,
}

impl Message {
    pub fn new(kind: MessageKind, claimed: &str, actual: &str) -> Self {
        Message { kind, claimed: claimed.into(), actual: actual.into(), to: None, trace: None }
    }

    fn from_gateway(kind: MessageKind, to: &str) -> Self {
        Message { to: Some(to.into()), ..Message::new(kind, GATEWAY_ID, GATEWAY_ID) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    AwaitingBurst,
    /// Transient: entered and left within the step that receives a burst.
    Verifying,
    Associated,
    DataTransfer,
    SuspicionChallenge,
    AwaitingSuspectBurst,
}

impl Phase {
    fn is_pending(self) -> bool {
        matches!(self, Phase::AwaitingBurst | Phase::SuspicionChallenge | Phase::AwaitingSuspectBurst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Handled,
    Ignored,
    TimedOut,
}

/// One transition of the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub before: Phase,
    /// `None` for a timeout.
    pub event: Option<Message>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via: Option<Phase>,
    pub after: Phase,
    pub emitted: Vec<Message>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub outcome: Outcome,
    /// Association table after the transition.
    pub table: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayState {
    pub phase: Phase,
    /// Device id to authenticated flag.
    pub table: BTreeMap<String, bool>,
    /// Device whose verification is in progress.
    pub pending: Option<String>,
    /// Phase to return to when a challenge ends without re-association.
    pub resume: Option<Phase>,
    /// Time the current pending phase was entered.
    pub since: f64,
    /// Pending phases older than this revert (see [`GatewayState::expire`]).
    pub timeout: Option<f64>,
}

impl Default for GatewayState {
    fn default() -> Self {
        GatewayState {
            phase: Phase::Idle,
            table: BTreeMap::new(),
            pending: None,
            resume: None,
            since: 0.0,
            timeout: None,
        }
    }
}

impl GatewayState {
    pub fn with_timeout(timeout: Option<f64>) -> Self {
        GatewayState { timeout, ..GatewayState::default() }
    }

    pub fn is_authenticated(&self, id: &str) -> bool {
        self.table.get(id).copied().unwrap_or(false)
    }

    fn enter(&mut self, phase: Phase, t: f64) {
        self.phase = phase;
        self.since = t;
    }

    fn record(&self, t: f64, before: Phase, event: Option<Message>, emitted: Vec<Message>, outcome: Outcome) -> Transition {
        Transition {
            t,
            before,
            event,
            via: None,
            after: self.phase,
            emitted,
            verdict: None,
            outcome,
            table: self.table.clone(),
        }
    }

    /// Reverts a pending phase whose timeout has elapsed by time `t`:
    /// an unanswered association goes back to idle, an unanswered challenge
    /// to the phase it interrupted. The association table is not touched.
    pub fn expire(&mut self, t: f64) -> Option<Transition> {
        let limit = self.timeout?;
        if !self.phase.is_pending() || t - self.since <= limit {
            return None;
        }
        let before = self.phase;
        let back = if before == Phase::AwaitingBurst { Phase::Idle } else { self.resume.unwrap_or(Phase::Idle) };
        self.pending = None;
        self.resume = None;
        self.enter(back, t);
        Some(self.record(t, before, None, Vec::new(), Outcome::TimedOut))
    }

    /// Applies one event. Verifier failures count as an off-body verdict.
    pub fn step(&mut self, t: f64, event: Message, verifier: &dyn Verifier) -> Transition {
        use MessageKind as K;
        use Phase as P;
        let before = self.phase;
        let id = event.claimed.clone();
        let pending_is = |s: &Self| s.pending.as_deref() == Some(id.as_str());
        let mut emitted = Vec::new();
        match (before, event.kind) {
            (P::Idle, K::AssocRequest) if !self.is_authenticated(&id) => {
                self.pending = Some(id.clone());
                self.enter(P::AwaitingBurst, t);
                emitted.push(Message::from_gateway(K::VerifyAck, &id));
            }
            (P::AwaitingBurst, K::EmptyPacketBurst) if pending_is(self) && event.trace.is_some() => {
                let verdict = verify(&event, verifier);
                self.pending = None;
                if verdict.on_body {
                    self.table.insert(id.clone(), true);
                    self.enter(P::Associated, t);
                    emitted.push(Message::from_gateway(K::AssocAccept, &id));
                } else {
                    self.enter(P::Idle, t);
                    emitted.push(Message::from_gateway(K::AssocDeny, &id));
                }
                let mut tr = self.record(t, before, Some(event), emitted, Outcome::Handled);
                tr.via = Some(P::Verifying);
                tr.verdict = Some(verdict);
                return tr;
            }
            (P::Associated | P::DataTransfer, K::DataFrame) if self.is_authenticated(&id) => {
                self.enter(P::DataTransfer, t);
            }
            (P::Associated | P::DataTransfer, K::AuthRequest) if self.is_authenticated(&id) => {
                // The existing association is kept until the request is verified.
                self.resume = Some(before);
                self.pending = Some(id.clone());
                self.enter(P::SuspicionChallenge, t);
            }
            (P::SuspicionChallenge, K::DeviceDenialChallenge) if pending_is(self) => {
                self.enter(P::AwaitingSuspectBurst, t);
                emitted.push(Message::from_gateway(K::VerifyAck, &id));
            }
            (P::AwaitingSuspectBurst, K::EmptyPacketBurst) if pending_is(self) && event.trace.is_some() => {
                let verdict = verify(&event, verifier);
                self.pending = None;
                let resume = self.resume.take().unwrap_or(P::DataTransfer);
                if verdict.on_body {
                    // The request really came from the device: re-associate it.
                    self.table.insert(id.clone(), true);
                    self.enter(P::Associated, t);
                    emitted.push(Message::from_gateway(K::AssocAccept, &id));
                } else {
                    self.enter(if resume == P::Associated { P::Associated } else { P::DataTransfer }, t);
                    emitted.push(Message::from_gateway(K::DropNotice, &id));
                }
                let mut tr = self.record(t, before, Some(event), emitted, Outcome::Handled);
                tr.via = Some(P::Verifying);
                tr.verdict = Some(verdict);
                return tr;
            }
            _ => return self.record(t, before, Some(event), emitted, Outcome::Ignored),
        }
        self.record(t, before, Some(event), emitted, Outcome::Handled)
    }
}

fn verify(event: &Message, verifier: &dyn Verifier) -> Verdict {
    let denied = Verdict { on_body: false, score: 0.0, votes_on: 0, segments: 0 };
    match event.trace.as_ref().map(TraceRef::generate) {
        Some(Ok(trace)) => verifier.verify(&trace).unwrap_or(denied),
        _ => denied,
    }
}

/// Convenience wrapper over [`GatewayState::step`].
pub fn gateway_step(state: &GatewayState, t: f64, event: Message, verifier: &dyn Verifier) -> (GatewayState, Vec<Message>) {
    let mut next = state.clone();
    let tr = next.step(t, event, verifier);
    (next, tr.emitted)
}
