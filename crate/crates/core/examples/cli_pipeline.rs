//! Drives the command-line entry point in-process: mel extraction, range
//! vocoding and a loss report, all in a temporary directory.
//!
//! cargo run --release --example cli_pipeline

use std::f64::consts::PI;

use rndvoc::cli::main_with_args;
use rndvoc::dsp::{write_wav, AudioBuffer, WavFormat};

fn run(args: &[&str]) -> i32 {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with_args(std::iter::once("rndvoc").chain(args.iter().copied()), &mut out, &mut err);
    println!("$ rndvoc {}", args.join(" "));
    print!("{}", String::from_utf8_lossy(&out));
    eprint!("{}", String::from_utf8_lossy(&err));
    println!("(exit {code})\n");
    code
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("rndvoc_cli_pipeline");
    std::fs::create_dir_all(&dir)?;
    let p = |n: &str| dir.join(n).to_string_lossy().into_owned();
    let sr = 22050;
    let x = AudioBuffer::new(
        (0..256 * 86).map(|i| 0.4 * (2.0 * PI * 330.0 * i as f64 / sr as f64).sin()).collect(),
        sr,
    )?;
    write_wav(p("in.wav"), &x, WavFormat::Pcm16)?;

    run(&["mel-extract", "--in", &p("in.wav"), "--out", &p("mel.bin")]);
    run(&["range-vocode", "--in", &p("mel.bin"), "--out", &p("range.wav")]);
    run(&["loss-eval", "--true", &p("in.wav"), "--est", &p("range.wav")]);
    run(&["count", "--preset", "ultralite", "--seconds", "1"]);
    Ok(())
}
