//! Parameter and MAC counts for every preset against the published figures.
//!
//! cargo run --release --example model_accounting

use rndvoc::generator::{count_macs, count_params, mac_breakdown, frames_for};
use rndvoc::model_io::Preset;

fn main() {
    println!("{:<10} {:>10} {:>8} {:>10} {:>8}", "preset", "params(M)", "dev", "GMACs/5s", "dev");
    for preset in Preset::ALL {
        let cfg = preset.config();
        let gen = cfg.generator();
        let (p_target, m_target) = preset.published_targets();
        let params = count_params(&gen) as f64 / 1e6;
        let macs = count_macs(&gen, 5.0, cfg.sample_rate, cfg.hop) as f64 / 1e9;
        println!(
            "{:<10} {:>10.3} {:>+7.1}% {:>10.2} {:>+7.1}%",
            preset.name(),
            params,
            100.0 * (params / p_target - 1.0),
            macs,
            100.0 * (macs / m_target - 1.0)
        );
    }

    let gen = Preset::Ljspeech.config().generator();
    let b = mac_breakdown(&gen, frames_for(5.0, 22050, 256));
    println!("\nljspeech breakdown (GMACs): hsem {:.2}  cbm {:.2}  nbm {:.2}  hmdm {:.2}  hpdm {:.2}",
        b.hsem as f64 / 1e9, b.cbm as f64 / 1e9, b.nbm as f64 / 1e9, b.hmdm as f64 / 1e9, b.hpdm as f64 / 1e9);
}
