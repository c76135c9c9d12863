//! Seeded image/mask augmentation.
//!
//! An [`AugmentSpec`] is an ordered list of steps plus a seed. Steps with a
//! parameter range draw their value once per application; step `i` uses
//! random streams `2i` (parameter draw) and `2i + 1` (noise or displacement
//! field), so editing one step never perturbs the draws of another.
//!
//! ```json
//! {"seed": 7, "steps": [
//!   {"kind": "gamma", "min": 0.7, "max": 1.5},
//!   {"kind": "rician", "sigma_min": 0.0, "sigma_max": 0.05},
//!   {"kind": "flip_h"},
//!   {"kind": "bbox_jitter", "max_shift_frac": 0.1, "max_scale_frac": 0.1}
//! ]}
//! ```

mod clahe;
mod intensity;
pub mod rng;
mod spatial;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use clahe::clahe;
pub use intensity::{add_rician_noise, adjust_brightness, gamma_correct};
pub use spatial::{jitter_bbox, spatial_transform, SpatialStep};

use crate::error::{check_same_dims, Error, Result};
use crate::grid::{BoundingBox, Image, Mask};
use rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentStep {
    Gamma {
        #[serde(default = "defaults::gamma_min")]
        min: f64,
        #[serde(default = "defaults::gamma_max")]
        max: f64,
    },
    Brightness {
        #[serde(default = "defaults::brightness_min")]
        min: f64,
        #[serde(default = "defaults::brightness_max")]
        max: f64,
    },
    Clahe {
        #[serde(default = "defaults::tiles")]
        tiles_x: usize,
        #[serde(default = "defaults::tiles")]
        tiles_y: usize,
        #[serde(default = "defaults::clip_limit")]
        clip_limit: f64,
    },
    Rician {
        #[serde(default)]
        sigma_min: f64,
        #[serde(default = "defaults::rician_max")]
        sigma_max: f64,
    },
    FlipH,
    FlipV,
    Rotate {
        #[serde(default = "defaults::max_degrees")]
        max_degrees: f64,
    },
    Scale {
        #[serde(default = "defaults::scale_min")]
        min: f64,
        #[serde(default = "defaults::scale_max")]
        max: f64,
    },
    Elastic {
        #[serde(default = "defaults::elastic_alpha")]
        alpha: f64,
        #[serde(default = "defaults::elastic_sigma")]
        sigma: f64,
    },
    BboxJitter {
        #[serde(default = "defaults::jitter")]
        max_shift_frac: f64,
        #[serde(default = "defaults::jitter")]
        max_scale_frac: f64,
    },
}

mod defaults {
    pub fn gamma_min() -> f64 {
        0.7
    }
    pub fn gamma_max() -> f64 {
        1.5
    }
    pub fn brightness_min() -> f64 {
        0.8
    }
    pub fn brightness_max() -> f64 {
        1.2
    }
    pub fn tiles() -> usize {
        8
    }
    pub fn clip_limit() -> f64 {
        2.0
    }
    pub fn rician_max() -> f64 {
        0.05
    }
    pub fn max_degrees() -> f64 {
        15.0
    }
    pub fn scale_min() -> f64 {
        0.9
    }
    pub fn scale_max() -> f64 {
        1.1
    }
    pub fn elastic_alpha() -> f64 {
        8.0
    }
    pub fn elastic_sigma() -> f64 {
        6.0
    }
    pub fn jitter() -> f64 {
        0.1
    }
}

fn check_range(name: &str, lo: f64, hi: f64, positive: bool) -> Result<()> {
    let bound_ok = |v: f64| v.is_finite() && if positive { v > 0.0 } else { v >= 0.0 };
    if bound_ok(lo) && bound_ok(hi) && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} range [{lo}, {hi}] is invalid"
        )))
    }
}

impl AugmentStep {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AugmentStep::Gamma { min, max } => check_range("gamma", min, max, true),
            AugmentStep::Brightness { min, max } => check_range("brightness", min, max, false),
            AugmentStep::Clahe {
                tiles_x,
                tiles_y,
                clip_limit,
            } => {
                if tiles_x == 0 || tiles_y == 0 {
                    return Err(Error::InvalidParameter("CLAHE tiles must be >= 1".into()));
                }
                check_range("clip_limit", clip_limit, clip_limit, true)
            }
            AugmentStep::Rician {
                sigma_min,
                sigma_max,
            } => check_range("rician sigma", sigma_min, sigma_max, false),
            AugmentStep::FlipH | AugmentStep::FlipV => Ok(()),
            AugmentStep::Rotate { max_degrees } => {
                check_range("rotation", max_degrees, max_degrees, false)
            }
            AugmentStep::Scale { min, max } => check_range("scale", min, max, true),
            AugmentStep::Elastic { alpha, sigma } => {
                check_range("elastic alpha", alpha, alpha, false)?;
                check_range("elastic sigma", sigma, sigma, true)
            }
            AugmentStep::BboxJitter {
                max_shift_frac,
                max_scale_frac,
            } => {
                check_range("shift fraction", max_shift_frac, max_shift_frac, false)?;
                check_range("scale fraction", max_scale_frac, max_scale_frac, false)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    pub steps: Vec<AugmentStep>,
    pub seed: u64,
}

impl AugmentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps.iter().try_for_each(AugmentStep::validate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub image: Image,
    pub mask: Mask,
    /// Result of the last `bbox_jitter` step, if any ran on a nonempty mask.
    pub bbox: Option<BoundingBox>,
}

fn draw(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Runs every step of `spec` in order. The box for `bbox_jitter` is the
/// tight box of the mask as it stands when that step runs.
pub fn apply(img: &Image, mask: &Mask, spec: &AugmentSpec) -> Result<Augmented> {
    check_same_dims(img.dims(), mask.dims())?;
    spec.validate()?;
    let seed = spec.seed;
    let mut image = img.clone();
    let mut mask = mask.clone();
    let mut bbox = None;
    for (i, step) in spec.steps.iter().enumerate() {
        let param_stream = 2 * i as u64;
        let data_stream = param_stream + 1;
        let mut rng = stream_rng(seed, param_stream);
        let spatial = |s: SpatialStep, image: &Image, mask: &Mask| {
            spatial::spatial_transform_stream(image, mask, &s, seed, data_stream)
        };
        match *step {
            AugmentStep::Gamma { min, max } => {
                image = gamma_correct(&image, draw(&mut rng, min, max))?;
            }
            AugmentStep::Brightness { min, max } => {
                image = adjust_brightness(&image, draw(&mut rng, min, max))?;
            }
            AugmentStep::Clahe {
                tiles_x,
                tiles_y,
                clip_limit,
            } => {
                image = clahe(&image, tiles_x, tiles_y, clip_limit)?;
            }
            AugmentStep::Rician {
                sigma_min,
                sigma_max,
            } => {
                let sigma = draw(&mut rng, sigma_min, sigma_max);
                image = intensity::add_rician_noise_stream(&image, sigma, seed, data_stream)?;
            }
            AugmentStep::FlipH => (image, mask) = spatial(SpatialStep::FlipH, &image, &mask)?,
            AugmentStep::FlipV => (image, mask) = spatial(SpatialStep::FlipV, &image, &mask)?,
            AugmentStep::Rotate { max_degrees } => {
                let degrees = draw(&mut rng, -max_degrees, max_degrees);
                (image, mask) = spatial(SpatialStep::Rotate { degrees }, &image, &mask)?;
            }
            AugmentStep::Scale { min, max } => {
                let factor = draw(&mut rng, min, max);
                (image, mask) = spatial(SpatialStep::Scale { factor }, &image, &mask)?;
            }
            AugmentStep::Elastic { alpha, sigma } => {
                (image, mask) = spatial(SpatialStep::Elastic { alpha, sigma }, &image, &mask)?;
            }
            AugmentStep::BboxJitter {
                max_shift_frac,
                max_scale_frac,
            } => {
                bbox = match mask.bounding_box() {
                    Some(b) => Some(spatial::jitter_bbox_stream(
                        &b,
                        max_shift_frac,
                        max_scale_frac,
                        seed,
                        data_stream,
                        mask.width(),
                        mask.height(),
                    )?),
                    None => None,
                };
            }
        }
    }
    Ok(Augmented { image, mask, bbox })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Image, Mask) {
        let img = Image::from_fn(24, 20, |r, c| ((r * 13 + c * 7) % 29) as f64 / 28.0).unwrap();
        let m = Mask::from_fn(24, 20, |r, c| (6..12).contains(&r) && (5..15).contains(&c)).unwrap();
        (img, m)
    }

    fn full_spec(seed: u64) -> AugmentSpec {
        AugmentSpec::from_json(&format!(
            r#"{{"seed": {seed}, "steps": [
                {{"kind": "gamma"}}, {{"kind": "brightness"}},
                {{"kind": "clahe", "tiles_x": 2, "tiles_y": 2}},
                {{"kind": "rician"}}, {{"kind": "flip_h"}}, {{"kind": "flip_v"}},
                {{"kind": "rotate"}}, {{"kind": "scale"}}, {{"kind": "elastic"}},
                {{"kind": "bbox_jitter"}}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn defaults_fill_missing_parameters() {
        let spec = full_spec(1);
        assert_eq!(spec.steps[0], AugmentStep::Gamma { min: 0.7, max: 1.5 });
        assert_eq!(
            spec.steps[8],
            AugmentStep::Elastic {
                alpha: 8.0,
                sigma: 6.0
            }
        );
        assert_eq!(
            spec.steps[9],
            AugmentStep::BboxJitter {
                max_shift_frac: 0.1,
                max_scale_frac: 0.1
            }
        );
    }

    #[test]
    fn same_spec_same_output() {
        let (img, m) = fixture();
        let a = apply(&img, &m, &full_spec(11)).unwrap();
        let b = apply(&img, &m, &full_spec(11)).unwrap();
        assert_eq!(a, b);
        assert!(a.bbox.is_some());
        assert_ne!(a.image, apply(&img, &m, &full_spec(12)).unwrap().image);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(
            AugmentSpec::from_json(r#"{"seed": 0, "steps": [{"kind": "gamma", "min": -1}]}"#)
                .is_err()
        );
        assert!(AugmentSpec::from_json(r#"{"seed": 0, "steps": [{"kind": "warp"}]}"#).is_err());
        assert!(AugmentSpec::from_json(r#"{"steps": []}"#).is_err());
    }

    #[test]
    fn streams_follow_step_index() {
        let (img, m) = fixture();
        let noise = AugmentStep::Rician {
            sigma_min: 0.05,
            sigma_max: 0.05,
        };
        let a = AugmentSpec {
            seed: 3,
            steps: vec![AugmentStep::Gamma { min: 1.0, max: 1.0 }, noise],
        };
        let b = AugmentSpec {
            seed: 3,
            steps: vec![AugmentStep::Brightness { min: 1.0, max: 1.0 }, noise],
        };
        let c = AugmentSpec {
            seed: 3,
            steps: vec![noise],
        };
        let out_a = apply(&img, &m, &a).unwrap();
        assert_eq!(out_a, apply(&img, &m, &b).unwrap());
        assert_ne!(out_a.image, apply(&img, &m, &c).unwrap().image);
    }

    #[test]
    fn empty_mask_stays_empty() {
        let (img, _) = fixture();
        let out = apply(&img, &Mask::zeros(24, 20).unwrap(), &full_spec(5)).unwrap();
        assert!(out.mask.is_empty());
        assert_eq!(out.bbox, None);
    }
}
