//! Segment a trace into 5 s windows and build the 380-dimensional profiles.

use onbody::channel::{gen_onbody_trace, EnvironmentClass, MotionClass};
use onbody::profile::{build_profile, segment, INTERVALS, STFT_WINDOWS};

fn main() -> onbody::Result<()> {
    let trace = gen_onbody_trace(MotionClass::ArmMoving, EnvironmentClass::Office, 60.0, 3)?;
    let segs = segment(&trace)?;
    println!("{} samples -> {} segments", trace.signal.len(), segs.len());
    let p = build_profile(&segs[0])?;
    println!(
        "profile: {} dims = time {} + M {} ({STFT_WINDOWS}x{INTERVALS}) + PC {}",
        p.features.len(),
        p.time_block().len(),
        p.m_block().len(),
        p.pc_block().len()
    );
    println!("sum PC = {:.12}", p.pc_block().iter().sum::<f64>());
    let top: Vec<String> = p.pc_block().iter().take(8).map(|v| format!("{v:.3}")).collect();
    println!("PC, first 8 intervals (0.5 Hz each): {}", top.join(" "));
    Ok(())
}
