//! Oracle copy synthesis: rebuilds a clip from its log-mel plus the true
//! null-space residual and true phase, then from the range part alone.
//!
//! cargo run --release --example copy_synthesis -- [in.wav] [out_dir]

use std::f64::consts::PI;
use std::path::PathBuf;

use rndvoc::dsp::{
    build_mel_filterbank, istft, mel_spectrogram, read_wav, stft, write_wav, AudioBuffer, StftConfig, WavFormat,
};
use rndvoc::model_io::Preset;
use rndvoc::rnd::{assemble_magnitude, assemble_spectrum, range_project};

fn snr(a: &[f64], b: &[f64]) -> f64 {
    let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let s: f64 = a.iter().map(|x| x * x).sum();
    10.0 * (s / e).log10()
}

fn main() -> rndvoc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let cfg = Preset::Ljspeech.config();
    let stft_cfg: StftConfig = cfg.stft();
    let sr = cfg.sample_rate;
    let x = match args.get(1) {
        Some(p) => read_wav(p)?,
        None => AudioBuffer::new(
            (0..256 * 172)
                .map(|i| {
                    let t = i as f64 / sr as f64;
                    0.3 * (2.0 * PI * (180.0 + 20.0 * (5.0 * t).sin()) * t).sin()
                })
                .collect(),
            sr,
        )?,
    };
    let out_dir = PathBuf::from(args.get(2).map(String::as_str).unwrap_or("."));

    let fb = build_mel_filterbank(&cfg.mel())?;
    let spec = stft(&x, &stft_cfg)?;
    let mel = mel_spectrogram(&spec, &fb, cfg.log_floor)?;
    let range = range_project(&mel, &fb)?;
    let mag = spec.magnitude();
    let phase = spec.phase();

    // true residual as the null estimate: its null projection is exactly
    // what the range part is missing
    let residual = &mag - &range.values;
    let full = assemble_magnitude(&range, &residual, &fb)?;
    let y_full = istft(&assemble_spectrum(&full.magnitude, &phase)?, &stft_cfg, x.len(), sr)?;

    let zero = ndarray::Array2::zeros(mag.dim());
    let coarse = assemble_magnitude(&range, &zero, &fb)?;
    let y_range = istft(&assemble_spectrum(&coarse.magnitude, &phase)?, &stft_cfg, x.len(), sr)?;

    println!("frames               {}", mel.ncols());
    println!("range + residual     snr {:.1} dB", snr(&x.samples, &y_full.samples));
    println!("range only           snr {:.1} dB  ({} clamped bins)", snr(&x.samples, &y_range.samples),
        coarse.unclamped.iter().filter(|&&v| v < 0.0).count());
    write_wav(out_dir.join("copy_full.wav"), &y_full, WavFormat::Pcm16)?;
    write_wav(out_dir.join("copy_range.wav"), &y_range, WavFormat::Pcm16)?;
    Ok(())
}
