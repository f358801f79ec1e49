//! Builds both mel filterbanks and reports the pseudo-inverse quality and
//! the dimension of the null space the generator fills in.
//!
//! cargo run --release --example mel_pseudo_inverse

use rndvoc::dsp::{build_mel_filterbank, MelConfig};
use rndvoc::rnd::null_projector;

fn main() -> rndvoc::Result<()> {
    for (name, cfg) in [("ljspeech", MelConfig::ljspeech()), ("libritts", MelConfig::libritts())] {
        let fb = build_mel_filterbank(&cfg)?;
        let p = null_projector(&fb);
        let trace: f64 = p.diag().sum();
        let penrose = (&fb.a_pinv.dot(&fb.a).dot(&fb.a_pinv) - &fb.a_pinv)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        println!("{name}");
        println!("  A                  {} x {}", fb.n_mels(), fb.n_freqs());
        println!("  fmin..fmax         {}..{} Hz", cfg.f_min, cfg.f_max);
        println!("  rank               {}", fb.report.rank);
        println!("  |AA+A - A|max      {:.3e}", fb.report.max_reconstruction_error);
        println!("  |A+AA+ - A+|max    {:.3e}", penrose);
        println!("  null space dim     {:.1} (trace of I - A+A)", trace);
    }
    Ok(())
}
