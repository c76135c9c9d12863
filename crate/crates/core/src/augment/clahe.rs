//! Contrast-limited adaptive histogram equalization.
//!
//! The image is split into a `tiles_x` by `tiles_y` grid. Each tile gets a
//! 256-bin histogram that is clipped at `clip_limit` times the mean bin
//! count, with the clipped excess spread evenly over all bins. The tile's
//! normalized cumulative histogram is its intensity mapping, and every
//! pixel blends the mappings of the (up to) four tiles whose centers
//! surround it.

use crate::error::{Error, Result};
use crate::grid::Image;

const BINS: usize = 256;

pub(crate) fn bin_of(v: f64) -> usize {
    ((v * 255.0).round() as usize).min(BINS - 1)
}

/// Tile boundaries `edges[i]..edges[i + 1]` along one axis.
fn tile_edges(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

fn tile_mapping(img: &Image, xs: (usize, usize), ys: (usize, usize), clip_limit: f64) -> Vec<f64> {
    let mut hist = [0.0f64; BINS];
    for r in ys.0..ys.1 {
        for c in xs.0..xs.1 {
            hist[bin_of(img.get(r, c))] += 1.0;
        }
    }
    let n = ((xs.1 - xs.0) * (ys.1 - ys.0)) as f64;
    let clip = clip_limit * n / BINS as f64;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > clip {
            excess += *h - clip;
            *h = clip;
        }
    }
    let share = excess / BINS as f64;
    let mut cdf = 0.0;
    hist.iter()
        .map(|h| {
            cdf += h + share;
            (cdf / n).min(1.0)
        })
        .collect()
}

/// Lower tile index and blend weight for coordinate `p` given tile centers.
fn locate(p: f64, centers: &[f64]) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers
        .windows(2)
        .position(|w| p < w[1])
        .unwrap_or(last - 1);
    (i, i + 1, (p - centers[i]) / (centers[i + 1] - centers[i]))
}

pub fn clahe(img: &Image, tiles_x: usize, tiles_y: usize, clip_limit: f64) -> Result<Image> {
    if tiles_x == 0 || tiles_y == 0 {
        return Err(Error::InvalidParameter(
            "CLAHE needs at least one tile per axis".into(),
        ));
    }
    if !(clip_limit.is_finite() && clip_limit > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "clip limit must be positive, got {clip_limit}"
        )));
    }
    let (w, h) = img.dims();
    if w < tiles_x || h < tiles_y {
        return Err(Error::InvalidParameter(format!(
            "{w}x{h} image is smaller than the {tiles_x}x{tiles_y} tile grid"
        )));
    }
    let xe = tile_edges(w, tiles_x);
    let ye = tile_edges(h, tiles_y);
    let center = |e: &[usize], i: usize| (e[i] + e[i + 1] - 1) as f64 / 2.0;
    let cx: Vec<f64> = (0..tiles_x).map(|i| center(&xe, i)).collect();
    let cy: Vec<f64> = (0..tiles_y).map(|i| center(&ye, i)).collect();

    let maps: Vec<Vec<f64>> = (0..tiles_y)
        .flat_map(|ty| (0..tiles_x).map(move |tx| (tx, ty)))
        .map(|(tx, ty)| tile_mapping(img, (xe[tx], xe[tx + 1]), (ye[ty], ye[ty + 1]), clip_limit))
        .collect();
    let map_at = |tx: usize, ty: usize, b: usize| maps[ty * tiles_x + tx][b];

    Image::from_fn(w, h, |r, c| {
        let b = bin_of(img.get(r, c));
        let (x0, x1, fx) = locate(c as f64, &cx);
        let (y0, y1, fy) = locate(r as f64, &cy);
        let top = map_at(x0, y0, b) * (1.0 - fx) + map_at(x1, y0, b) * fx;
        let bottom = map_at(x0, y1, b) * (1.0 - fx) + map_at(x1, y1, b) * fx;
        (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        let img = Image::filled(4, 4, 0.5).unwrap();
        assert!(clahe(&img, 0, 1, 2.0).is_err());
        assert!(clahe(&img, 1, 1, 0.0).is_err());
        assert!(clahe(&img, 5, 1, 2.0).is_err());
    }

    #[test]
    fn single_tile_is_monotone() {
        let img = Image::from_fn(16, 16, |r, c| ((r * 7 + c * 3) % 16) as f64 / 15.0).unwrap();
        let out = clahe(&img, 1, 1, 1.5).unwrap();
        let mut pairs: Vec<(f64, f64)> = img
            .data()
            .iter()
            .copied()
            .zip(out.data().iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn locate_clamps_at_outer_centers() {
        let centers = [1.5, 5.5];
        assert_eq!(locate(0.0, &centers), (0, 0, 0.0));
        assert_eq!(locate(7.0, &centers), (1, 1, 0.0));
        assert_eq!(locate(3.5, &centers), (0, 1, 0.5));
    }
}
