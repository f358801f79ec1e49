//! The omnidirectional phase loss on a few hand-built phase fields: constant
//! offsets, wrapped copies and a local perturbation.
//!
//! cargo run --release --example phase_loss

use std::f64::consts::PI;

use ndarray::Array2;
use rndvoc::losses::{anti_wrap, loss_phase, omni_phase_diff, PhaseKernelBank};

fn main() -> rndvoc::Result<()> {
    let bank = PhaseKernelBank::new();
    let (f, t) = (32, 24);
    let p = Array2::from_shape_fn((f, t), |(k, n)| (0.3 * k as f64 + 0.7 * n as f64).sin() * 3.0);

    println!("kernel offsets (df, dt):");
    for j in 0..9 {
        let (df, dt) = PhaseKernelBank::offset(j);
        println!("  channel {j}  ({df:+}, {dt:+})");
    }
    println!("channels x bins x frames  {:?}", omni_phase_diff(&p, &bank).dim());
    println!("anti_wrap(3pi/2)          {:.4}", anti_wrap(1.5 * PI));

    let cases = [
        ("identical", p.clone()),
        ("wrapped by 2pi", p.mapv(|v| v + 2.0 * PI)),
        ("offset 0.5 rad", p.mapv(|v| v + 0.5)),
        ("offset pi", p.mapv(|v| v + PI)),
        ("one bin + pi", {
            let mut q = p.clone();
            q[[10, 10]] += PI;
            q
        }),
    ];
    for (label, q) in cases {
        println!("{label:<18} L_p = {:.6}", loss_phase(&p, &q, &bank)?);
    }
    Ok(())
}
