//! 3x3 Gaussian smoothing through a behavioral 8-bit multiplier.

use rayon::prelude::*;

use crate::app::GrayImage;
use crate::error::{Error, Result};
use crate::lut::{MultLut, Signedness};

/// Kernel coefficients, row-major. They sum to 246, below 256.
pub const KERNEL: [i64; 9] = [15, 31, 15, 31, 62, 31, 15, 31, 15];

/// Cap reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

fn filter_with(image: &GrayImage, mul: impl Fn(i64, i64) -> i64 + Sync) -> GrayImage {
    let (w, h) = (image.width(), image.height());
    let pixels: Vec<u8> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let mul = &mul;
            (0..w).map(move |x| {
                let mut acc = 0i64;
                for (t, &c) in KERNEL.iter().enumerate() {
                    let dx = (t % 3) as isize - 1;
                    let dy = (t / 3) as isize - 1;
                    let p = image.get_clamped(x as isize + dx, y as isize + dy) as i64;
                    acc += mul(c, p);
                }
                (acc >> 8).clamp(0, 255) as u8
            })
        })
        .collect();
    GrayImage::new(w, h, pixels).expect("same dimensions")
}

/// Filters `image`, computing every tap product as `mult(coefficient, pixel)`.
/// Borders replicate the edge pixels; results are `>> 8` then clamped.
pub fn gaussian_filter(image: &GrayImage, mult: &MultLut) -> Result<GrayImage> {
    if mult.width() != 8 || mult.signedness() != Signedness::Unsigned {
        return Err(Error::WidthMismatch(format!(
            "filter needs an 8-bit unsigned multiplier, got {}-bit {}",
            mult.width(),
            mult.signedness()
        )));
    }
    Ok(filter_with(image, |c, p| mult.get(c, p)))
}

/// Integer convolution with exact products.
pub fn gaussian_filter_reference(image: &GrayImage) -> GrayImage {
    filter_with(image, |c, p| c * p)
}

/// Peak signal-to-noise ratio in dB for 8-bit images.
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    if reference.width() != test.width() || reference.height() != test.height() {
        return Err(Error::WidthMismatch(format!(
            "{}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    let sse: u64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / reference.pixels().len() as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}
