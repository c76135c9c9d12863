//! Half-maximum threshold labeling of enhanced myocardium.
//!
//! The reference intensity is the maximum inside a scar-core ROI drawn by
//! the reader; every myocardial pixel at or above `fraction` of it (half by
//! default) is labeled scar.

use crate::error::{check_same_dims, Error, Result};
use crate::grid::{Image, Mask};

pub const DEFAULT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelingInputs {
    pub image: Image,
    /// Region between the epicardial and endocardial contours.
    pub myocardium: Mask,
    /// Scar-core region placed on the brightest enhancement.
    pub core_roi: Mask,
}

impl LabelingInputs {
    pub fn new(image: Image, myocardium: Mask, core_roi: Mask) -> Result<Self> {
        check_same_dims(image.dims(), myocardium.dims())?;
        check_same_dims(image.dims(), core_roi.dims())?;
        if core_roi.is_empty() {
            return Err(Error::EmptyRoi);
        }
        if core_roi
            .data()
            .iter()
            .zip(myocardium.data())
            .any(|(&roi, &myo)| roi != 0 && myo == 0)
        {
            return Err(Error::RoiOutsideMyocardium);
        }
        Ok(Self {
            image,
            myocardium,
            core_roi,
        })
    }

    /// Maximum intensity inside the core ROI.
    pub fn reference_intensity(&self) -> f64 {
        self.core_roi
            .foreground()
            .map(|(r, c)| self.image.get(r, c))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn fwhm_segment(inputs: &LabelingInputs) -> Result<Mask> {
    threshold_segment(inputs, DEFAULT_FRACTION)
}

/// Labels myocardial pixels with intensity >= `fraction` x the ROI maximum.
pub fn threshold_segment(inputs: &LabelingInputs, fraction: f64) -> Result<Mask> {
    if !(fraction.is_finite() && fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let threshold = fraction * inputs.reference_intensity();
    let (w, h) = inputs.image.dims();
    Mask::from_fn(w, h, |r, c| {
        inputs.myocardium.get(r, c) && inputs.image.get(r, c) >= threshold
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_is_inclusive() {
        let image = Image::new(4, 1, vec![0.8, 0.39, 0.40, 0.41]).unwrap();
        let myo = Mask::new(4, 1, vec![1; 4]).unwrap();
        let roi = Mask::new(4, 1, vec![1, 0, 0, 0]).unwrap();
        let out = fwhm_segment(&LabelingInputs::new(image, myo, roi).unwrap()).unwrap();
        assert_eq!(out.data(), &[1, 0, 1, 1]);
    }

    #[test]
    fn constant_image_labels_whole_myocardium() {
        let image = Image::filled(5, 5, 0.3).unwrap();
        let myo = Mask::from_fn(5, 5, |r, _| (1..4).contains(&r)).unwrap();
        let roi = Mask::from_fn(5, 5, |r, c| r == 2 && c == 2).unwrap();
        let out = fwhm_segment(&LabelingInputs::new(image, myo.clone(), roi).unwrap()).unwrap();
        assert_eq!(out, myo);
    }

    #[test]
    fn input_validation() {
        let image = Image::filled(3, 3, 0.3).unwrap();
        let myo = Mask::from_fn(3, 3, |r, _| r == 1).unwrap();
        let outside = Mask::from_fn(3, 3, |r, c| r == 0 && c == 0).unwrap();
        assert!(matches!(
            LabelingInputs::new(image.clone(), myo.clone(), outside),
            Err(Error::RoiOutsideMyocardium)
        ));
        assert!(matches!(
            LabelingInputs::new(image.clone(), myo.clone(), Mask::zeros(3, 3).unwrap()),
            Err(Error::EmptyRoi)
        ));
        assert!(matches!(
            LabelingInputs::new(image, myo, Mask::zeros(2, 3).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn random_inputs() -> impl Strategy<Value = LabelingInputs> {
        (
            proptest::collection::vec(0.0f64..=1.0, 64),
            proptest::collection::vec(any::<bool>(), 64),
            0usize..64,
        )
            .prop_map(|(pix, myo_bits, seed_px)| {
                let image = Image::new(8, 8, pix).unwrap();
                let mut myo: Vec<u8> = myo_bits.into_iter().map(u8::from).collect();
                myo[seed_px] = 1;
                let roi = (0..64)
                    .map(|i| u8::from(i == seed_px || (myo[i] == 1 && i % 5 == 0)))
                    .collect();
                LabelingInputs::new(
                    image,
                    Mask::new(8, 8, myo).unwrap(),
                    Mask::new(8, 8, roi).unwrap(),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn raising_fraction_only_shrinks(inputs in random_inputs(), lo in 0.05f64..1.0, hi in 0.05f64..1.0) {
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let wide = threshold_segment(&inputs, lo).unwrap();
            let narrow = threshold_segment(&inputs, hi).unwrap();
            prop_assert!(narrow.data().iter().zip(wide.data()).all(|(&n, &w)| n <= w));
        }

        #[test]
        fn output_contains_roi_argmax(inputs in random_inputs()) {
            let out = fwhm_segment(&inputs).unwrap();
            let max = inputs.reference_intensity();
            for (r, c) in inputs.core_roi.foreground() {
                if inputs.image.get(r, c) == max {
                    prop_assert!(out.get(r, c));
                }
            }
        }
    }
}
