//! Forged re-authentication during data transfer: the association is kept
//! while the request is challenged, and the forged request is dropped.

use onbody::protocol::{deadlock_script, run_scenario, OracleVerifier, ScenarioConfig, ThresholdVerifier, Verifier};

fn main() -> onbody::Result<()> {
    let cfg = ScenarioConfig { burst_segments: 3, ..ScenarioConfig::default() };
    let verifiers: [&dyn Verifier; 2] = [&OracleVerifier, &ThresholdVerifier::default()];
    for v in verifiers {
        println!("{} verifier:", v.name());
        for t in run_scenario(&deadlock_script("wearable", "attacker"), v, &cfg, 4)? {
            let ev = t.event.as_ref().map(|m| format!("{:?} {}->{}", m.kind, m.actual, m.claimed)).unwrap_or_default();
            let out: Vec<String> = t.emitted.iter().map(|m| format!("{:?}", m.kind)).collect();
            println!("  {:<40} {:?} -> {:?}  {out:?}  table {:?}", ev, t.before, t.after, t.table);
        }
    }
    Ok(())
}
