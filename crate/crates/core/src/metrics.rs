//! PSNR and single-scale SSIM.
//!
//! SSIM uses the usual constants: an 11×11 Gaussian window with σ = 1.5,
//! K1 = 0.01, K2 = 0.03, dynamic range 255, averaged over every position where
//! the window fits entirely inside the image (no padding).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image_io::Image;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityScore {
    /// Decibels; `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityScore {
    pub fn between(reference: &Image, test: &Image) -> Result<Self> {
        Ok(Self {
            psnr: psnr(reference, test, 255.0)?,
            ssim: ssim(reference, test)?,
        })
    }
}

fn check_shape(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_shape(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10·log10(peak² / MSE)`, or `+∞` when the images are identical.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable "valid" filtering of a row-major buffer.
fn filter_valid(data: &[f64], width: usize, height: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = width - n + 1;
    let oh = height - n + 1;
    let mut tmp = vec![0.0; ow * height];
    for r in 0..height {
        let row = &data[r * width..(r + 1) * width];
        for c in 0..ow {
            tmp[r * ow + c] = k.iter().zip(&row[c..c + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|i| k[i] * tmp[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity. Both images must be at least 11×11.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_shape(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            patch_size: SSIM_WINDOW,
        });
    }
    if a.data() == b.data() {
        return Ok(1.0);
    }
    let k = gaussian_window();
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(x, w, h, &k);
    let mu_y = filter_valid(y, w, h, &k);
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);

    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cxy = e_xy[i] - mx * my;
            ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
        })
        .sum();
    Ok((total / mu_x.len() as f64).clamp(-1.0, 1.0))
}
