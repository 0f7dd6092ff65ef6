//! On-body versus off-body RSS traces across motions and environments.
//!
//! cargo run --release --example channel_traces

use onbody::channel::test_support::{high_band_fraction, variance};
use onbody::channel::{gen_offbody_trace, gen_onbody_trace, EnvironmentClass, MotionClass, DEFAULT_ATTACKER_RANGE_M};
use onbody::dsp::SAMPLE_RATE_HZ;

fn main() -> onbody::Result<()> {
    println!("{:<12} {:<13} {:>10} {:>10} {:>10}", "environment", "source", "mean dBm", "var dB^2", ">15 Hz");
    for env in EnvironmentClass::ALL {
        for motion in [MotionClass::Standing, MotionClass::Walking] {
            let t = gen_onbody_trace(motion, env, 20.0, 1)?;
            row(env.name(), &format!("on/{}", motion.name()), t.signal.samples());
        }
        let t = gen_offbody_trace(env, DEFAULT_ATTACKER_RANGE_M, 20.0, 1)?;
        row(env.name(), "off-body", t.signal.samples());
    }
    Ok(())
}

fn row(env: &str, source: &str, x: &[f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    println!(
        "{env:<12} {source:<13} {mean:>10.2} {:>10.3} {:>10.3}",
        variance(x),
        high_band_fraction(x, SAMPLE_RATE_HZ, 15.0)
    );
}
