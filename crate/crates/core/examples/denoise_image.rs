//! Full denoiser on a synthetic depth map, or on an image given on the
//! command line, with a per-pass PSNR table.
//!
//! `cargo run --release --example denoise_image -- [sigma] [clean.png] [out_dir]`

use std::path::PathBuf;

use graphdenoise::pipeline::denoise_detailed;
use graphdenoise::synthetic::depth_scene;
use graphdenoise::{add_awgn, load_image, psnr, save_image, NoiseSpec, ParamSchedule, QualityScore};

fn main() -> graphdenoise::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sigma: f64 = args.first().and_then(|a| a.parse().ok()).unwrap_or(20.0);
    let clean = match args.get(1) {
        Some(path) => load_image(path)?,
        None => depth_scene(96, 96),
    };
    let out = PathBuf::from(args.get(2).cloned().unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out)?;

    let noisy = add_awgn(&clean, NoiseSpec::new(sigma, 2024)?);
    let schedule = ParamSchedule::for_sigma(sigma);
    println!(
        "sigma {sigma}: theta_n {}, theta_r {}, theta_c {}",
        schedule.theta_n, schedule.theta_r, schedule.theta_c
    );
    println!("noisy: {:.2} dB", psnr(&clean, &noisy.quantized(), 255.0)?);

    let result = denoise_detailed(&noisy, &schedule, Some(&clean), false)?;
    for it in &result.report.iterations {
        println!(
            "pass {}: {:.2} dB, SSIM {:.4}, {}/{} groups converged, {:.1} inner iterations on average, {:.2}s",
            it.iteration,
            it.psnr.unwrap_or(f64::NAN),
            it.ssim.unwrap_or(f64::NAN),
            it.converged_groups,
            it.groups,
            it.mean_inner_iterations,
            it.seconds
        );
    }
    let blind = result.iterates.last().expect("at least one pass");
    let blind_score = QualityScore::between(&clean, &blind.quantized())?;
    let oracle_score = QualityScore::between(&clean, &result.image.quantized())?;
    println!("blind (last pass): {:.2} dB, SSIM {:.4}", blind_score.psnr, blind_score.ssim);
    println!(
        "oracle (pass {}): {:.2} dB, SSIM {:.4}",
        result.report.selected_iteration, oracle_score.psnr, oracle_score.ssim
    );
    save_image(&noisy, out.join("denoise_noisy.png"))?;
    save_image(blind, out.join("denoise_blind.png"))?;
    save_image(&result.image, out.join("denoise_oracle.png"))?;
    Ok(())
}
