//! Reconstruction quality metrics: PSNR and windowed SSIM.

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// PSNR of identical images is infinite; it is reported as this sentinel.
pub const PSNR_CAP_DB: f64 = 200.0;

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Both metrics for one image pair, tagged with the data range used
/// (the SSIM stabilization constants depend on it).
#[derive(Clone, Copy, Debug)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub data_range: f64,
}

pub fn measure(
    reference: &[f64],
    test: &[f64],
    side: usize,
    data_range: f64,
) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(reference, test, data_range)?,
        ssim: ssim(reference, test, side, data_range)?,
        data_range,
    })
}

/// 10·log10(range²/MSE), capped at [`PSNR_CAP_DB`] for identical images.
pub fn psnr(reference: &[f64], test: &[f64], data_range: f64) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::dims("psnr", reference.len(), test.len()));
    }
    if reference.is_empty() {
        return Err(Error::Contract("psnr: empty images".into()));
    }
    if data_range <= 0.0 || data_range.is_nan() {
        return Err(Error::InvalidConfig("psnr data_range must be > 0".into()));
    }
    let mut sum = 0.0;
    for (r, t) in reference.iter().zip(test) {
        let d = r - t;
        sum += d * d;
    }
    let mse = sum / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (data_range * data_range / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for r in 0..SSIM_WINDOW {
        for c_i in 0..SSIM_WINDOW {
            let dr = r as f64 - c;
            let dc = c_i as f64 - c;
            let v = (-(dr * dr + dc * dc) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[r * SSIM_WINDOW + c_i] = v;
            sum += v;
        }
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Mean local SSIM over all fully interior 11×11 Gaussian windows.
///
/// Identical inputs give exactly 1.0: every weighted moment of the two
/// images is computed by the same arithmetic, so each local score is an
/// exact ratio of equal products.
pub fn ssim(reference: &[f64], test: &[f64], side: usize, data_range: f64) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::dims("ssim", reference.len(), test.len()));
    }
    if reference.len() != side * side {
        return Err(Error::dims("ssim side", side * side, reference.len()));
    }
    if side < SSIM_WINDOW {
        return Err(Error::Contract(alloc::format!(
            "ssim needs side >= {SSIM_WINDOW}, got {side}"
        )));
    }
    if data_range <= 0.0 || data_range.is_nan() {
        return Err(Error::InvalidConfig("ssim data_range must be > 0".into()));
    }
    let w = gaussian_window();
    let c1 = (SSIM_K1 * data_range) * (SSIM_K1 * data_range);
    let c2 = (SSIM_K2 * data_range) * (SSIM_K2 * data_range);
    let valid = side - SSIM_WINDOW + 1;
    let mut total = 0.0;
    for r0 in 0..valid {
        for c0 in 0..valid {
            let mut mx = 0.0;
            let mut my = 0.0;
            let mut mxx = 0.0;
            let mut myy = 0.0;
            let mut mxy = 0.0;
            for wr in 0..SSIM_WINDOW {
                let row = (r0 + wr) * side + c0;
                for wc in 0..SSIM_WINDOW {
                    let weight = w[wr * SSIM_WINDOW + wc];
                    let x = reference[row + wc];
                    let y = test[row + wc];
                    mx += weight * x;
                    my += weight * y;
                    mxx += weight * x * x;
                    myy += weight * y * y;
                    mxy += weight * x * y;
                }
            }
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cov = mxy - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
        }
    }
    Ok(total / (valid * valid) as f64)
}
