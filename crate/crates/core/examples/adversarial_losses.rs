//! Hinge and feature-matching losses for a set of made-up sub-discriminator
//! outputs.
//!
//! cargo run --release --example adversarial_losses

use rndvoc::losses::{feature_match, hinge_discriminator, hinge_generator, total_generator_loss, DiscriminatorView, LossComponents, LossWeights};

fn main() -> rndvoc::Result<()> {
    let feats = |s: f64| vec![vec![s; 8], vec![-s; 4]];
    let real = vec![
        DiscriminatorView::new(1.5, feats(1.0)),
        DiscriminatorView::from_score_map(&[0.2, 0.8, 1.1], feats(0.5)),
    ];
    let fake = vec![
        DiscriminatorView::new(-0.5, feats(0.7)),
        DiscriminatorView::from_score_map(&[0.1, -1.6, 0.3], feats(0.1)),
    ];
    let l_d = hinge_discriminator(&real, &fake)?;
    let l_g = hinge_generator(&fake)?;
    let l_fm = feature_match(&real, &fake)?;
    println!("discriminator hinge  {l_d:.4}");
    println!("generator hinge      {l_g:.4}");
    println!("feature matching     {l_fm:.4}");

    let c = LossComponents {
        amplitude: 0.4,
        phase: 1.2,
        real_imag: 0.05,
        mel: 0.3,
        consistency: 0.02,
        adversarial: l_g,
        feature_match: l_fm,
    };
    let report = total_generator_loss(&c, &LossWeights::unverified_defaults())?;
    for (name, raw, weighted) in &report.terms {
        println!("  {name:<14} raw {raw:>8.4}  weighted {weighted:>8.4}");
    }
    println!("total                {:.4}", report.total);
    Ok(())
}
