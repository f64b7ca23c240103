//! Seeded Gaussian noise and the two quality metrics.
//!
//! `cargo run --release --example noise_and_metrics -- [out_dir]`

use std::path::PathBuf;

use graphdenoise::synthetic::depth_scene;
use graphdenoise::{add_awgn, psnr, save_image, ssim, NoiseSpec};

fn main() -> graphdenoise::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out)?;
    let clean = depth_scene(256, 256);
    save_image(&clean, out.join("clean.png"))?;

    println!("sigma  expected  raw     stored  ssim");
    for sigma in [5.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
        let noisy = add_awgn(&clean, NoiseSpec::new(sigma, 42)?);
        // "stored" is rounded and clipped to 8 bits, as written to disk
        let q = noisy.quantized();
        let expected = 20.0 * (255.0 / sigma).log10();
        println!(
            "{sigma:5}  {expected:8.2}  {:6.2}  {:6.2}  {:.4}",
            psnr(&clean, &noisy, 255.0)?,
            psnr(&clean, &q, 255.0)?,
            ssim(&clean, &q)?
        );
        save_image(&noisy, out.join(format!("noisy_sigma{sigma}.png")))?;
    }
    Ok(())
}
