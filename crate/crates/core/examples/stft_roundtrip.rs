//! Analysis and resynthesis of a chirp through the vocoder STFT, with the
//! overlap-add check and the frame-count rule.
//!
//! cargo run --release --example stft_roundtrip

use std::f64::consts::PI;

use rndvoc::dsp::{istft, stft, AudioBuffer, StftConfig};

fn main() -> rndvoc::Result<()> {
    let sr = 22050;
    let cfg = StftConfig::vocoder_default();
    // hop-aligned length: exactly T frames' worth of samples
    let len = 256 * 200;
    let chirp: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 / sr as f64;
            0.5 * (2.0 * PI * (100.0 * t + 1500.0 * t * t)).sin()
        })
        .collect();
    let x = AudioBuffer::new(chirp, sr)?;

    let spec = stft(&x, &cfg)?;
    let y = istft(&spec, &cfg, x.len(), sr)?;
    let err: f64 = x.samples.iter().zip(&y.samples).map(|(a, b)| (a - b).powi(2)).sum();
    let sig: f64 = x.samples.iter().map(|a| a * a).sum();

    println!("n_fft / hop          {} / {}", cfg.n_fft, cfg.hop);
    println!("cola deviation       {:.3e}", cfg.cola_deviation());
    println!("samples              {}", x.len());
    println!("frames               {} (floor(len/hop) + 1 = {})", spec.n_frames(), cfg.num_frames(x.len())?);
    println!("bins                 {}", spec.n_freqs());
    println!("roundtrip snr        {:.1} dB", 10.0 * (sig / err).log10());

    // squared Hann is not overlap-add constant at half overlap
    let half = StftConfig::hann(1024, 512, true);
    println!("hop 512 accepted     {}", half.validate().is_ok());
    Ok(())
}
