//! Soft-label combined segmentation loss and its analytic gradient.
//!
//! The loss mixes three terms computed from raw scores `s`:
//!
//! * Dice loss on `a = sigmoid(s)` against the hard mask,
//! * binary cross-entropy against the hard mask,
//! * KL divergence from a Gaussian-smoothed, sum-normalized copy of the mask
//!   (the soft target `p`) to `q = softmax(sigmoid(s))` taken over the whole
//!   slice.
//!
//! Default weights are 0.2 (Dice), 0.2 (cross-entropy) and 0.6 (KL) with a
//! smoothing width of 2 pixels.

use serde::{Deserialize, Serialize};

use crate::error::{check_same_dims, Error, Result};
use crate::grid::{Field, Mask, ScoreMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub w_dice: f64,
    pub w_ce: f64,
    pub w_kl: f64,
    pub sigma: f64,
    pub eps_dice: f64,
    pub eps_log: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            w_dice: 0.2,
            w_ce: 0.2,
            w_kl: 0.6,
            sigma: 2.0,
            eps_dice: 1e-6,
            eps_log: 1e-12,
        }
    }
}

impl LossConfig {
    pub fn with_weights(w_dice: f64, w_ce: f64, w_kl: f64) -> Result<Self> {
        let c = Self {
            w_dice,
            w_ce,
            w_kl,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_dice, self.w_ce, self.w_kl];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "loss weights must be non-negative, got {weights:?}"
            )));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "loss weights must sum to 1, got {weights:?}"
            )));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("eps_dice", self.eps_dice),
            ("eps_log", self.eps_log),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Probability mass over the pixels of a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDistribution {
    width: usize,
    height: usize,
    p: Vec<f64>,
}

impl PixelDistribution {
    pub fn new(width: usize, height: usize, p: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != p.len() {
            return Err(Error::InvalidData(format!(
                "{} probabilities for a {width}x{height} grid",
                p.len()
            )));
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidData(
                "negative or non-finite probability".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidData(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { width, height, p })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    log_softmax(x).into_iter().map(f64::exp).collect()
}

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`),
/// valid for any offset.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn convolve_rows(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; data.len()];
    for row in 0..h {
        let line = &data[row * w..(row + 1) * w];
        for col in 0..w {
            out[row * w + col] = kernel
                .iter()
                .enumerate()
                .map(|(k, t)| t * line[reflect(col as i64 + k as i64 - r, w)])
                .sum();
        }
    }
    out
}

fn convolve_cols(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; data.len()];
    for row in 0..h {
        for col in 0..w {
            out[row * w + col] = kernel
                .iter()
                .enumerate()
                .map(|(k, t)| t * data[reflect(row as i64 + k as i64 - r, h) * w + col])
                .sum();
        }
    }
    out
}

/// Separable Gaussian blur of a real raster with reflect padding.
///
/// With symmetric reflection the blur operator is a symmetric matrix with
/// unit row sums, so the global sum of the input is preserved.
pub fn smooth_values(data: &[f64], w: usize, h: usize, sigma: f64) -> Result<Vec<f64>> {
    let kernel = gaussian_kernel(sigma)?;
    let tmp = convolve_rows(data, w, h, &kernel);
    Ok(convolve_cols(&tmp, w, h, &kernel))
}

pub fn gaussian_smooth(m: &Mask, sigma: f64) -> Result<Field> {
    let input: Vec<f64> = m.data().iter().map(|&v| f64::from(v)).collect();
    let out = smooth_values(&input, m.width(), m.height(), sigma)?;
    // rounding can leave values a few ulps outside [0, 1]
    Field::new(
        m.width(),
        m.height(),
        out.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )
}

pub fn soft_target(m: &Mask, sigma: f64) -> Result<PixelDistribution> {
    if m.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let smooth = gaussian_smooth(m, sigma)?;
    let total: f64 = smooth.data().iter().sum();
    PixelDistribution::new(
        m.width(),
        m.height(),
        smooth.data().iter().map(|v| v / total).collect(),
    )
}

fn activations(s: &ScoreMap) -> Vec<f64> {
    s.data().iter().map(|&x| sigmoid(x)).collect()
}

pub fn predicted_distribution(s: &ScoreMap) -> PixelDistribution {
    let q = softmax(&activations(s));
    PixelDistribution::new(s.width(), s.height(), q)
        .expect("softmax of finite inputs is a distribution")
}

/// KL(p || q) = sum p log(p / max(q, eps_log)), with 0 log 0 = 0.
pub fn kl_divergence(p: &PixelDistribution, q: &PixelDistribution, eps_log: f64) -> Result<f64> {
    check_same_dims(p.dims(), q.dims())?;
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.max(eps_log).ln()))
        .sum())
}

fn targets(t: &Mask) -> impl Iterator<Item = f64> + '_ {
    t.data().iter().map(|&v| f64::from(v))
}

pub fn dice_loss(s: &ScoreMap, t: &Mask, eps_dice: f64) -> Result<f64> {
    check_same_dims(s.dims(), t.dims())?;
    let a = activations(s);
    let inter: f64 = a.iter().zip(targets(t)).map(|(a, t)| a * t).sum();
    let denom = a.iter().sum::<f64>() + t.count() as f64 + eps_dice;
    Ok(1.0 - (2.0 * inter + eps_dice) / denom)
}

/// Mean binary cross-entropy on logits,
/// `max(s, 0) - s t + ln(1 + exp(-|s|))` per pixel.
pub fn bce_loss(s: &ScoreMap, t: &Mask) -> Result<f64> {
    check_same_dims(s.dims(), t.dims())?;
    let total: f64 = s
        .data()
        .iter()
        .zip(targets(t))
        .map(|(&x, t)| x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
        .sum();
    Ok(total / s.len() as f64)
}

/// Unweighted values of the three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossTerms {
    pub dice: f64,
    pub bce: f64,
    /// Absent when the KL weight is zero and the target is empty.
    pub kl: Option<f64>,
    pub total: f64,
}

pub fn loss_terms(s: &ScoreMap, t: &Mask, c: &LossConfig) -> Result<LossTerms> {
    c.validate()?;
    check_same_dims(s.dims(), t.dims())?;
    let dice = dice_loss(s, t, c.eps_dice)?;
    let bce = bce_loss(s, t)?;
    let kl = if c.w_kl > 0.0 || !t.is_empty() {
        let p = soft_target(t, c.sigma)?;
        Some(kl_divergence(&p, &predicted_distribution(s), c.eps_log)?)
    } else {
        None
    };
    let total = c.w_dice * dice + c.w_ce * bce + c.w_kl * kl.unwrap_or(0.0);
    Ok(LossTerms {
        dice,
        bce,
        kl,
        total,
    })
}

pub fn combined_loss(s: &ScoreMap, t: &Mask, c: &LossConfig) -> Result<f64> {
    loss_terms(s, t, c).map(|terms| terms.total)
}

/// Analytic dL/ds for every pixel.
///
/// Each term is differentiated with respect to the activations and then
/// chained through `da/ds = a (1 - a)`. The KL gradient treats the log clamp
/// as inactive: `q >= exp(-1) / N` because softmax inputs lie in (0, 1).
pub fn grad_combined_loss(s: &ScoreMap, t: &Mask, c: &LossConfig) -> Result<Field> {
    c.validate()?;
    check_same_dims(s.dims(), t.dims())?;
    let n = s.len() as f64;
    let a = activations(s);
    let tv: Vec<f64> = targets(t).collect();
    let mut grad = vec![0.0; a.len()];

    if c.w_dice > 0.0 {
        let inter: f64 = a.iter().zip(&tv).map(|(a, t)| a * t).sum();
        let denom = a.iter().sum::<f64>() + t.count() as f64 + c.eps_dice;
        let num = 2.0 * inter + c.eps_dice;
        for (i, g) in grad.iter_mut().enumerate() {
            let d_da = -(2.0 * tv[i] * denom - num) / (denom * denom);
            *g += c.w_dice * d_da * a[i] * (1.0 - a[i]);
        }
    }
    if c.w_ce > 0.0 {
        for (i, g) in grad.iter_mut().enumerate() {
            *g += c.w_ce * (a[i] - tv[i]) / n;
        }
    }
    if c.w_kl > 0.0 {
        let p = soft_target(t, c.sigma)?;
        let q = softmax(&a);
        for (i, g) in grad.iter_mut().enumerate() {
            *g += c.w_kl * (q[i] - p.probs()[i]) * a[i] * (1.0 - a[i]);
        }
    }
    Field::new(s.width(), s.height(), grad)
}

/// Outcome of comparing the analytic gradient with central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
}

/// Floor on the relative-error denominator. Central differences at step
/// 1e-3 carry roughly 1e-9 of truncation error, so components much smaller
/// than this floor are judged on absolute agreement instead.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares [`grad_combined_loss`] against central finite differences with
/// the given step.
pub fn check_gradient(s: &ScoreMap, t: &Mask, c: &LossConfig, step: f64) -> Result<GradCheck> {
    let analytic = grad_combined_loss(s, t, c)?;
    let mut out = GradCheck {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
    };
    for (i, &g) in analytic.data().iter().enumerate() {
        let x = s.data()[i];
        let plus = combined_loss(&s.with_value(i, x + step)?, t, c)?;
        let minus = combined_loss(&s.with_value(i, x - step)?, t, c)?;
        let numeric = (plus - minus) / (2.0 * step);
        out.max_abs_error = out.max_abs_error.max((g - numeric).abs());
        out.max_rel_error = out.max_rel_error.max(relative_error(g, numeric));
    }
    Ok(out)
}
