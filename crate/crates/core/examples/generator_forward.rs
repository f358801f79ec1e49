//! Random-weight vocoder pass on a synthetic mel, checking that the
//! reconstructed magnitude re-degrades to the input mel.
//!
//! cargo run --release --example generator_forward -- [preset] [seconds]

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rndvoc::dsp::{build_mel_filterbank, exp_mel};
use rndvoc::generator::generator_forward;
use rndvoc::model_io::{init_random, Preset};
use rndvoc::rnd::degradation_error;

fn main() -> rndvoc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let preset = Preset::parse(args.get(1).map(String::as_str).unwrap_or("ultralite"))?;
    let seconds: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2.0);

    let cfg = preset.config();
    let gen = cfg.generator();
    let stft = cfg.stft();
    let fb = build_mel_filterbank(&cfg.mel())?;
    let weights = init_random(&gen, 0)?;

    let frames = (seconds * cfg.sample_rate as f64 / cfg.hop as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mel = Array2::from_shape_fn((gen.n_mels, frames), |_| rng.gen_range(-6.0..1.0));

    let start = Instant::now();
    let out = generator_forward(&mel, &fb, &gen, &weights, &stft, cfg.sample_rate)?;
    let elapsed = start.elapsed();

    println!("preset            {}", preset.name());
    println!("mel               {} x {}", mel.nrows(), mel.ncols());
    println!("magnitude         {} x {}", out.magnitude.nrows(), out.magnitude.ncols());
    println!("audio samples     {}", out.audio.len());
    println!("consistency error {:.3e}", degradation_error(&fb, &out.unclamped, &exp_mel(&mel)));
    println!("clamped bins      {}", out.unclamped.iter().filter(|&&v| v < 0.0).count());
    println!("forward time      {:.3} s", elapsed.as_secs_f64());
    Ok(())
}
