//! Legitimate association versus a spoofed one, verified by the propagation
//! pattern of an empty-packet burst.

use onbody::protocol::{handshake_script, run_scenario, spoofing_script, ScenarioConfig, ThresholdVerifier, Transition};

fn main() -> onbody::Result<()> {
    let verifier = ThresholdVerifier::default();
    let cfg = ScenarioConfig::default();
    println!("legitimate device:");
    show(&run_scenario(&handshake_script("wearable"), &verifier, &cfg, 1)?);
    println!("attacker claiming the wearable's id:");
    show(&run_scenario(&spoofing_script("wearable", "attacker"), &verifier, &cfg, 2)?);
    Ok(())
}

fn show(transcript: &[Transition]) {
    for t in transcript {
        let ev = t.event.as_ref().map_or("timeout".to_string(), |m| format!("{:?} from {} (really {})", m.kind, m.claimed, m.actual));
        let out: Vec<String> = t.emitted.iter().map(|m| format!("{:?}", m.kind)).collect();
        let verdict = t.verdict.map_or(String::new(), |v| format!("  statistic {:.2} -> {}", v.score, if v.on_body { "on-body" } else { "off-body" }));
        println!("  t={:<3} {:?} --[{ev}]--> {:?}  emits {out:?}{verdict}", t.t, t.before, t.after);
    }
}
