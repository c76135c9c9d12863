//! Pixelwise intensity augmentations on [0, 1] images.

use rand_distr::{Distribution, Normal};

use super::rng::stream_rng;
use crate::error::{Error, Result};
use crate::grid::Image;

pub fn gamma_correct(img: &Image, gamma: f64) -> Result<Image> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    img.map(|v| v.powf(gamma))
}

pub fn adjust_brightness(img: &Image, factor: f64) -> Result<Image> {
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "brightness factor must be non-negative, got {factor}"
        )));
    }
    img.map(|v| (v * factor).clamp(0.0, 1.0))
}

/// Magnitude of the signal plus complex Gaussian noise, clamped to [0, 1].
pub fn add_rician_noise(img: &Image, sigma_n: f64, seed: u64) -> Result<Image> {
    add_rician_noise_stream(img, sigma_n, seed, 0)
}

pub(crate) fn add_rician_noise_stream(
    img: &Image,
    sigma_n: f64,
    seed: u64,
    stream: u64,
) -> Result<Image> {
    if !(sigma_n.is_finite() && sigma_n >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be non-negative, got {sigma_n}"
        )));
    }
    if sigma_n == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma_n).expect("sigma checked above");
    let mut rng = stream_rng(seed, stream);
    img.map(|v| {
        let re = v + normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        re.hypot(im).clamp(0.0, 1.0)
    })
}
