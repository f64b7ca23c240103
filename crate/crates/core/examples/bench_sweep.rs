//! Noise sweep over a few synthetic maps, printed as the same CSV table the
//! `bench` subcommand writes.
//!
//! `cargo run --release --example bench_sweep`

use graphdenoise::cli::{bench_csv, derive_seed, BenchRow};
use graphdenoise::synthetic::{depth_scene, four_regions};
use graphdenoise::{add_awgn, denoise, psnr, ssim, NoiseSpec, ParamSchedule};

fn main() -> graphdenoise::Result<()> {
    let images = [("quadrants", four_regions(64, 64)), ("scene", depth_scene(80, 80))];
    let mut rows = Vec::new();
    for (name, clean) in &images {
        for sigma in [15.0, 20.0, 25.0, 30.0] {
            let noisy = add_awgn(clean, NoiseSpec::new(sigma, derive_seed(0, name, sigma))?);
            let (out, _) = denoise(&noisy, &ParamSchedule::for_sigma(sigma), None)?;
            let q = out.quantized();
            rows.push(BenchRow {
                image: name.to_string(),
                sigma,
                noisy_psnr: psnr(clean, &noisy.quantized(), 255.0)?,
                denoised_psnr: psnr(clean, &q, 255.0)?,
                ssim: ssim(clean, &q)?,
            });
            eprintln!("{name} sigma {sigma} done");
        }
    }
    print!("{}", bench_csv(&rows)?);
    Ok(())
}
