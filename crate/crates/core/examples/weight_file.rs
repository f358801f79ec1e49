//! Writes a seeded weight file, reads it back, and shows how a shape
//! mismatch is reported.
//!
//! cargo run --release --example weight_file -- [preset] [path]

use rndvoc::generator::manifest;
use rndvoc::model_io::{init_random, load_weights, read_weight_file, save_weights, Preset};
use rndvoc::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let preset = Preset::parse(args.get(1).map(String::as_str).unwrap_or("lite"))?;
    let path = std::env::temp_dir().join(args.get(2).map(String::as_str).unwrap_or("rndvoc_example.bin"));
    let cfg = preset.config().generator();

    let bundle = init_random(&cfg, 42)?;
    save_weights(&bundle, &path)?;
    let back = load_weights(&path, &cfg)?;
    println!("file                 {}", path.display());
    println!("bytes                {}", std::fs::metadata(&path)?.len());
    println!("tensors              {}", back.len());
    println!("scalars              {}", back.num_scalars());
    println!("bit-exact            {}", back == bundle);
    for spec in manifest(&cfg).iter().take(4) {
        println!("  {:<34} {:?}", spec.name, spec.shape);
    }

    let mut broken = read_weight_file(&path)?;
    let first = manifest(&cfg)[0].name.clone();
    broken.replace(&first, Tensor::zeros(&[3]));
    save_weights(&broken, &path)?;
    match load_weights(&path, &cfg) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
