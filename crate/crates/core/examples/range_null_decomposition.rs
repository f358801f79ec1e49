//! Splits a real magnitude spectrogram into range and null parts and shows
//! that any null-space change leaves the mel untouched.
//!
//! cargo run --release --example range_null_decomposition

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rndvoc::dsp::{build_mel_filterbank, exp_mel, magnitude_to_mel, stft, AudioBuffer, MelConfig, StftConfig};
use rndvoc::rnd::{assemble_magnitude, degradation_error, null_project, range_project};

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn main() -> rndvoc::Result<()> {
    let mel_cfg = MelConfig::ljspeech();
    let fb = build_mel_filterbank(&mel_cfg)?;
    let sr = mel_cfg.sample_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = AudioBuffer::new(
        (0..sr as usize)
            .map(|i| {
                let t = i as f64 / sr as f64;
                (1..6).map(|h| (2.0 * std::f64::consts::PI * 220.0 * h as f64 * t).sin() / h as f64).sum::<f64>() * 0.2
                    + rng.gen_range(-0.01..0.01)
            })
            .collect(),
        sr,
    )?;
    let mag = stft(&x, &StftConfig::vocoder_default())?.magnitude();

    let range = fb.a_pinv.dot(&fb.a.dot(&mag));
    let null = null_project(&mag, &fb)?;
    println!("|M - (range + null)|max     {:.3e}", max_abs(&(&mag - &(&range + &null))));
    println!("|A null|max                 {:.3e}", max_abs(&fb.a.dot(&null)));
    println!("<range, null>               {:.3e}", (&range * &null).sum());
    println!("null share of energy        {:.1}%", 100.0 * null.mapv(|v| v * v).sum() / mag.mapv(|v| v * v).sum());

    // starting from the log-mel alone
    let mel = magnitude_to_mel(&mag, &fb, mel_cfg.log_floor)?;
    let r = range_project(&mel, &fb)?;
    let target = exp_mel(&mel);
    for (label, estimate) in [
        ("zero null estimate", Array2::zeros(mag.dim())),
        ("true magnitude", mag.clone()),
        ("random noise", Array2::from_shape_fn(mag.dim(), |_| rng.gen_range(0.0..5.0))),
    ] {
        let m = assemble_magnitude(&r, &estimate, &fb)?;
        println!(
            "{label:<20} degradation error {:.2e}  negative bins {}",
            degradation_error(&fb, &m.unclamped, &target),
            m.unclamped.iter().filter(|&&v| v < 0.0).count()
        );
    }
    Ok(())
}
