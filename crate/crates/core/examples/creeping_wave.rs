//! Creeping-wave field strength around the torso versus link distance.

use onbody::channel::{creeping_field_magnitude, field_to_dbm, CreepingWaveParams, ETA_0};

fn main() -> onbody::Result<()> {
    println!("{:>6} {:>14} {:>10}", "d (m)", "|E| (V/m)", "dBm");
    for d in [0.2, 0.3, 0.4, 0.5, 0.6, 0.7] {
        let p = CreepingWaveParams::waist_to_hand(d, 1e-3);
        let e = creeping_field_magnitude(&p, 1.0)?;
        println!("{d:>6.2} {e:>14.6e} {:>10.2}", field_to_dbm(e, ETA_0));
    }
    Ok(())
}
