//! Three-scale FIR decomposition and a 1000-point magnitude spectrum.

use onbody::dsp::{
    apply_filter, design_fir, fft_magnitude, Band, Signal, DEFAULT_TAPS, HIGH_CUTOFF_HZ, LOW_CUTOFF_HZ, SAMPLE_RATE_HZ,
};

fn main() -> onbody::Result<()> {
    let fs = SAMPLE_RATE_HZ;
    // 0.2 Hz drift, 2 Hz gait, 40 Hz flutter.
    let x: Vec<f64> = (0..2500)
        .map(|i| {
            let t = i as f64 / fs;
            let w = std::f64::consts::TAU;
            3.0 * (w * 0.2 * t).sin() + 2.0 * (w * 2.0 * t).sin() + 0.5 * (w * 40.0 * t).sin()
        })
        .collect();
    let s = Signal::new(x, fs)?;
    for (name, k) in [
        ("low", design_fir(Band::LowPass, LOW_CUTOFF_HZ, HIGH_CUTOFF_HZ, DEFAULT_TAPS, fs)?),
        ("band", design_fir(Band::BandPass, LOW_CUTOFF_HZ, HIGH_CUTOFF_HZ, DEFAULT_TAPS, fs)?),
        ("high", design_fir(Band::HighPass, LOW_CUTOFF_HZ, HIGH_CUTOFF_HZ, DEFAULT_TAPS, fs)?),
    ] {
        let y = apply_filter(&s, &k)?;
        let rms = (y.samples().iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
        println!("{name:>5}: |H(0.2)| {:.3}  |H(2)| {:.3}  |H(40)| {:.3}  rms {rms:.3}", k.response_at(0.2), k.response_at(2.0), k.response_at(40.0));
    }
    let w = Signal::new(s.samples()[..1000].to_vec(), fs)?;
    let spec = fft_magnitude(&w, 1000)?;
    let mut peaks: Vec<(usize, f64)> = spec.magnitudes().iter().copied().enumerate().collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (bin, m) in peaks.iter().take(3) {
        println!("peak {:.1} Hz, magnitude {m:.1}", spec.bin_frequency(*bin));
    }
    Ok(())
}
