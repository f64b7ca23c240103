//! Grid search over the regularization weights at one noise level, used to
//! pick the shipped weight table. Prints the PSNR of every outer pass.
//!
//! `cargo run --release --example theta_search -- <sigma> [theta_n theta_r theta_c]`
//!
//! With explicit weights only that point is run.

use graphdenoise::synthetic::four_regions;
use graphdenoise::{add_awgn, denoise, psnr, NoiseSpec, ParamSchedule};

fn main() -> graphdenoise::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let sigma = args.first().copied().unwrap_or(20.0);
    let grid: Vec<[f64; 3]> = match args[..] {
        [_, n, r, c] => vec![[n, r, c]],
        _ => {
            let mut g = Vec::new();
            for r in [0.5, 1.0, 2.0] {
                for c in [0.4, 0.8, 1.6] {
                    g.push([1.0, r, c]);
                }
            }
            g
        }
    };
    let clean = four_regions(64, 64);
    let noisy = add_awgn(&clean, NoiseSpec::new(sigma, 1)?);
    println!("sigma {sigma}, noisy {:.2} dB", psnr(&clean, &noisy.quantized(), 255.0)?);
    println!("theta_n theta_r theta_c  psnr per pass");
    for [n, r, c] in grid {
        let mut s = ParamSchedule::for_sigma(sigma);
        (s.theta_n, s.theta_r, s.theta_c) = (n, r, c);
        let (_, report) = denoise(&noisy, &s, Some(&clean))?;
        let trace: Vec<String> = report
            .iterations
            .iter()
            .map(|it| format!("{:.2}", it.psnr.unwrap_or(f64::NAN)))
            .collect();
        println!("{n:7} {r:7} {c:7}  {}", trace.join(" "));
    }
    Ok(())
}
