//! Geometric augmentations applied jointly to an image and its mask, and
//! bounding-box jitter.
//!
//! Transforms are inverse-mapped: each output pixel looks up its source
//! location. Images are sampled bilinearly, masks by nearest neighbour, and
//! anything that maps from outside the frame is filled with 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::stream_rng;
use crate::error::{check_same_dims, Error, Result};
use crate::grid::{BoundingBox, Image, Mask};
use crate::loss::smooth_values;
use crate::resample::bilinear_clamped;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialStep {
    FlipH,
    FlipV,
    /// Rotation about the image center. Positive angles move +x toward +y
    /// (clockwise on screen, rows growing downward).
    Rotate {
        degrees: f64,
    },
    /// Isotropic zoom about the image center.
    Scale {
        factor: f64,
    },
    /// Smooth random displacement with peak amplitude `alpha` pixels.
    Elastic {
        alpha: f64,
        sigma: f64,
    },
}

impl SpatialStep {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpatialStep::FlipH | SpatialStep::FlipV => true,
            SpatialStep::Rotate { degrees } => degrees.is_finite(),
            SpatialStep::Scale { factor } => factor.is_finite() && factor > 0.0,
            SpatialStep::Elastic { alpha, sigma } => {
                alpha.is_finite() && alpha >= 0.0 && sigma.is_finite() && sigma > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid spatial step {self:?}"
            )))
        }
    }
}

/// Source coordinates (x, y) for every output pixel, row-major.
fn source_coords(
    step: &SpatialStep,
    w: usize,
    h: usize,
    seed: u64,
    stream: u64,
) -> Vec<(f64, f64)> {
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let grid = (0..h).flat_map(|r| (0..w).map(move |c| (c as f64, r as f64)));
    match *step {
        SpatialStep::FlipH => grid.map(|(x, y)| ((w - 1) as f64 - x, y)).collect(),
        SpatialStep::FlipV => grid.map(|(x, y)| (x, (h - 1) as f64 - y)).collect(),
        SpatialStep::Rotate { degrees } => {
            let (sin, cos) = degrees.to_radians().sin_cos();
            grid.map(|(x, y)| {
                let (u, v) = (x - cx, y - cy);
                (cx + u * cos + v * sin, cy - u * sin + v * cos)
            })
            .collect()
        }
        SpatialStep::Scale { factor } => grid
            .map(|(x, y)| (cx + (x - cx) / factor, cy + (y - cy) / factor))
            .collect(),
        SpatialStep::Elastic { alpha, sigma } => {
            let mut rng = stream_rng(seed, stream);
            let mut field = || -> Vec<f64> {
                let noise: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let smooth = smooth_values(&noise, w, h, sigma).expect("sigma validated");
                let peak = smooth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let scale = if peak > 0.0 { alpha / peak } else { 0.0 };
                smooth.into_iter().map(|v| v * scale).collect()
            };
            let dx = field();
            let dy = field();
            grid.enumerate()
                .map(|(i, (x, y))| (x + dx[i], y + dy[i]))
                .collect()
        }
    }
}

/// Removes the rounding residue of trigonometric maps near integers.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn inside(v: f64, len: usize) -> bool {
    v >= -0.5 && v < len as f64 - 0.5
}

pub fn spatial_transform(
    img: &Image,
    m: &Mask,
    step: &SpatialStep,
    seed: u64,
) -> Result<(Image, Mask)> {
    spatial_transform_stream(img, m, step, seed, 0)
}

pub(crate) fn spatial_transform_stream(
    img: &Image,
    m: &Mask,
    step: &SpatialStep,
    seed: u64,
    stream: u64,
) -> Result<(Image, Mask)> {
    check_same_dims(img.dims(), m.dims())?;
    step.validate()?;
    let (w, h) = img.dims();
    let coords = source_coords(step, w, h, seed, stream);

    let pixels: Vec<f64> = coords
        .iter()
        .map(|&(x, y)| {
            let (x, y) = (snap(x), snap(y));
            if inside(x, w) && inside(y, h) {
                bilinear_clamped(img.data(), w, h, x, y).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let labels: Vec<u8> = coords
        .iter()
        .map(|&(x, y)| {
            let (x, y) = (snap(x), snap(y));
            if inside(x, w) && inside(y, h) {
                let c = (x.round().max(0.0) as usize).min(w - 1);
                let r = (y.round().max(0.0) as usize).min(h - 1);
                u8::from(m.get(r, c))
            } else {
                0
            }
        })
        .collect();
    Ok((Image::new(w, h, pixels)?, Mask::new(w, h, labels)?))
}

/// Randomly shifts and rescales a box, then clamps it to the image.
///
/// The center moves by up to `max_shift_frac` of the box size per axis and
/// each side length is scaled by a factor in `1 ± max_scale_frac`.
pub fn jitter_bbox(
    b: &BoundingBox,
    max_shift_frac: f64,
    max_scale_frac: f64,
    seed: u64,
    img_w: usize,
    img_h: usize,
) -> Result<BoundingBox> {
    jitter_bbox_stream(b, max_shift_frac, max_scale_frac, seed, 0, img_w, img_h)
}

pub(crate) fn jitter_bbox_stream(
    b: &BoundingBox,
    max_shift_frac: f64,
    max_scale_frac: f64,
    seed: u64,
    stream: u64,
    img_w: usize,
    img_h: usize,
) -> Result<BoundingBox> {
    for (name, v) in [
        ("max_shift_frac", max_shift_frac),
        ("max_scale_frac", max_scale_frac),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be non-negative, got {v}"
            )));
        }
    }
    if !b.fits(img_w, img_h) {
        return Err(Error::InvalidParameter(format!(
            "box {b:?} does not fit a {img_w}x{img_h} image"
        )));
    }
    let mut rng = stream_rng(seed, stream);
    let mut unit = || rng.random_range(-1.0..=1.0);
    let (du, dv, su, sv) = (unit(), unit(), unit(), unit());

    let axis = |lo: usize, hi: usize, shift: f64, scale: f64, len: usize| -> (usize, usize) {
        let size = (hi - lo + 1) as f64;
        let center = (lo + hi) as f64 / 2.0 + shift * max_shift_frac * size;
        let new_size = (size * (1.0 + scale * max_scale_frac)).max(1.0);
        let half = (new_size - 1.0) / 2.0;
        let max = (len - 1) as f64;
        let a = (center - half).round().clamp(0.0, max) as usize;
        let b = (center + half).round().clamp(0.0, max) as usize;
        (a.min(b), a.max(b))
    };
    let (x_min, x_max) = axis(b.x_min, b.x_max, du, su, img_w);
    let (y_min, y_max) = axis(b.y_min, b.y_max, dv, sv, img_h);
    BoundingBox::new(x_min, y_min, x_max, y_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> (Image, Mask) {
        let img = Image::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 15.0).unwrap();
        let m = Mask::from_rows(&[[1, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 0, 0]]).unwrap();
        (img, m)
    }

    #[test]
    fn flip_twice_is_identity() {
        let (img, m) = fixture();
        for step in [SpatialStep::FlipH, SpatialStep::FlipV] {
            let (i1, m1) = spatial_transform(&img, &m, &step, 0).unwrap();
            assert_ne!(m1, m);
            let (i2, m2) = spatial_transform(&i1, &m1, &step, 0).unwrap();
            assert_eq!(i2, img);
            assert_eq!(m2, m);
        }
    }

    #[test]
    fn rotate_quarter_turn_matches_index_permutation() {
        let (img, m) = fixture();
        let (ri, rm) =
            spatial_transform(&img, &m, &SpatialStep::Rotate { degrees: 90.0 }, 0).unwrap();
        let h = 4;
        for r in 0..4 {
            for c in 0..4 {
                // source (r, c) lands on (c, H - 1 - r)
                assert_eq!(rm.get(c, h - 1 - r), m.get(r, c));
                assert_eq!(ri.get(c, h - 1 - r), img.get(r, c));
            }
        }
    }

    #[test]
    fn identity_parameters() {
        let (img, m) = fixture();
        for step in [
            SpatialStep::Rotate { degrees: 0.0 },
            SpatialStep::Scale { factor: 1.0 },
            SpatialStep::Elastic {
                alpha: 0.0,
                sigma: 3.0,
            },
        ] {
            let (i, mm) = spatial_transform(&img, &m, &step, 5).unwrap();
            assert_eq!(i, img);
            assert_eq!(mm, m);
        }
    }

    #[test]
    fn invalid_steps_rejected() {
        let (img, m) = fixture();
        assert!(spatial_transform(&img, &m, &SpatialStep::Scale { factor: 0.0 }, 0).is_err());
        assert!(spatial_transform(
            &img,
            &m,
            &SpatialStep::Elastic {
                alpha: 1.0,
                sigma: 0.0
            },
            0
        )
        .is_err());
        let other = Mask::zeros(3, 4).unwrap();
        assert!(matches!(
            spatial_transform(&img, &other, &SpatialStep::FlipH, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_jitter_keeps_box() {
        let b = BoundingBox::new(3, 4, 10, 12).unwrap();
        for seed in 0..20 {
            assert_eq!(jitter_bbox(&b, 0.0, 0.0, seed, 32, 32).unwrap(), b);
        }
        assert!(jitter_bbox(&b, -0.1, 0.0, 0, 32, 32).is_err());
        assert!(jitter_bbox(&b, 0.1, 0.0, 0, 8, 8).is_err());
    }

    fn steps() -> impl Strategy<Value = SpatialStep> {
        prop_oneof![
            Just(SpatialStep::FlipH),
            Just(SpatialStep::FlipV),
            (-180.0f64..180.0).prop_map(|degrees| SpatialStep::Rotate { degrees }),
            (0.5f64..2.0).prop_map(|factor| SpatialStep::Scale { factor }),
            (0.0f64..10.0, 0.5f64..8.0)
                .prop_map(|(alpha, sigma)| SpatialStep::Elastic { alpha, sigma }),
        ]
    }

    proptest! {
        #[test]
        fn transforms_keep_validity(bits in proptest::collection::vec(0u8..2, 100), step in steps(), seed in any::<u64>()) {
            let m = Mask::new(10, 10, bits).unwrap();
            let img = Image::from_fn(10, 10, |r, c| ((r * 3 + c * 5) % 11) as f64 / 10.0).unwrap();
            let (i, mm) = spatial_transform(&img, &m, &step, seed).unwrap();
            prop_assert!(mm.data().iter().all(|&v| v <= 1));
            prop_assert!(i.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let (_, empty) = spatial_transform(&img, &Mask::zeros(10, 10).unwrap(), &step, seed).unwrap();
            prop_assert!(empty.is_empty());
        }

        #[test]
        fn jitter_stays_inside(x0 in 0usize..30, y0 in 0usize..20, bw in 1usize..20, bh in 1usize..20,
                               shift in 0.0f64..2.0, scale in 0.0f64..3.0, seed in any::<u64>()) {
            let (w, h) = (50, 40);
            let b = BoundingBox::new(x0, y0, (x0 + bw - 1).min(w - 1), (y0 + bh - 1).min(h - 1)).unwrap();
            let j = jitter_bbox(&b, shift, scale, seed, w, h).unwrap();
            prop_assert!(j.fits(w, h));
            prop_assert_eq!(j, jitter_bbox(&b, shift, scale, seed, w, h).unwrap());
        }
    }
}
