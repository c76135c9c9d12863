//! Spacing-aware resampling to a fixed in-plane size.
//!
//! Output sample `k` sits at source coordinate `(k + 0.5) * old / new - 0.5`
//! (pixel-center alignment). Images are interpolated bilinearly with border
//! clamping; masks use nearest neighbour so they stay binary.

use crate::error::{Error, Result};
use crate::grid::{Image, Mask, PixelGeometry};

fn check_target(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        Err(Error::InvalidTarget { width, height })
    } else {
        Ok(())
    }
}

fn resampled_geometry(
    g: &PixelGeometry,
    old: (usize, usize),
    new: (usize, usize),
) -> Result<PixelGeometry> {
    PixelGeometry::new(
        g.spacing_x * old.0 as f64 / new.0 as f64,
        g.spacing_y * old.1 as f64 / new.1 as f64,
        g.slice_thickness,
    )
}

/// Bilinear sample at fractional (x, y), clamping coordinates to the raster.
pub(crate) fn bilinear_clamped(data: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |r: usize, c: usize| data[r * width + c];
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Nearest source index for output index `k` under center alignment.
fn nearest_index(k: usize, old: usize, new: usize) -> usize {
    (((2 * k + 1) * old) / (2 * new)).min(old - 1)
}

pub fn resample_image(
    img: &Image,
    g: &PixelGeometry,
    target_w: usize,
    target_h: usize,
) -> Result<(Image, PixelGeometry)> {
    check_target(target_w, target_h)?;
    let (w, h) = img.dims();
    let sx = w as f64 / target_w as f64;
    let sy = h as f64 / target_h as f64;
    let out = Image::from_fn(target_w, target_h, |r, c| {
        let x = (c as f64 + 0.5) * sx - 0.5;
        let y = (r as f64 + 0.5) * sy - 0.5;
        // clamp absorbs the last-ulp overshoot of the bilinear blend
        bilinear_clamped(img.data(), w, h, x, y).clamp(0.0, 1.0)
    })?;
    Ok((out, resampled_geometry(g, (w, h), (target_w, target_h))?))
}

pub fn resample_mask(
    m: &Mask,
    g: &PixelGeometry,
    target_w: usize,
    target_h: usize,
) -> Result<(Mask, PixelGeometry)> {
    check_target(target_w, target_h)?;
    let (w, h) = m.dims();
    let out = Mask::from_fn(target_w, target_h, |r, c| {
        m.get(nearest_index(r, h, target_h), nearest_index(c, w, target_w))
    })?;
    Ok((out, resampled_geometry(g, (w, h), (target_w, target_h))?))
}
