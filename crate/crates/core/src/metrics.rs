//! Overlap, distance and size-based agreement between two masks.
//!
//! Conventions: two empty masks agree perfectly (DSC = AS = PS = 1), while
//! the Hausdorff distance is undefined when either mask is empty.

use serde::{Deserialize, Serialize};

use crate::error::{check_same_dims, Error, Result};
use crate::grid::{Mask, PixelGeometry};

const NEIGHBORS_4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Foreground pixels with at least one 4-neighbour in the background or
/// outside the image.
pub fn extract_boundary(m: &Mask) -> Mask {
    let (w, h) = m.dims();
    let data = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| {
            let edge = m.get(r, c)
                && NEIGHBORS_4
                    .iter()
                    .any(|&(dr, dc)| !m.get_signed(r as isize + dr, c as isize + dc));
            u8::from(edge)
        })
        .collect();
    Mask::new(w, h, data).expect("boundary keeps dimensions")
}

fn intersection(a: &Mask, b: &Mask) -> usize {
    a.data()
        .iter()
        .zip(b.data())
        .filter(|(&x, &y)| x != 0 && y != 0)
        .count()
}

/// 1 - ||a| - |b|| / (|a| + |b|), with 0/0 read as perfect agreement.
///
/// Evaluated as the equal ratio 2 min(a, b) / (a + b): one division of
/// exact integers, hence correctly rounded.
pub fn count_similarity(a: usize, b: usize) -> f64 {
    if a + b == 0 {
        1.0
    } else {
        (2 * a.min(b)) as f64 / (a + b) as f64
    }
}

pub fn dsc(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_same_dims(pred.dims(), gt.dims())?;
    let total = pred.count() + gt.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * intersection(pred, gt) as f64 / total as f64)
}

pub fn area_similarity(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_same_dims(pred.dims(), gt.dims())?;
    Ok(count_similarity(pred.count(), gt.count()))
}

pub fn perimeter_similarity(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_same_dims(pred.dims(), gt.dims())?;
    Ok(count_similarity(
        extract_boundary(pred).count(),
        extract_boundary(gt).count(),
    ))
}

fn boundary_points(m: &Mask, g: &PixelGeometry) -> Vec<(f64, f64)> {
    extract_boundary(m)
        .foreground()
        .map(|(r, c)| (c as f64 * g.spacing_x, r as f64 * g.spacing_y))
        .collect()
}

/// max over `from` of the distance to the nearest point of `to`, squared.
fn directed_sq(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &(x, y) in from {
        let mut best = f64::INFINITY;
        for &(u, v) in to {
            let d = (x - u) * (x - u) + (y - v) * (y - v);
            if d < best {
                best = d;
                // this point cannot raise the maximum any more
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// Symmetric Hausdorff distance between the boundary-pixel centers of the
/// two masks, in millimetres.
pub fn hausdorff(pred: &Mask, gt: &Mask, g: &PixelGeometry) -> Result<f64> {
    check_same_dims(pred.dims(), gt.dims())?;
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyMask);
    }
    let a = boundary_points(pred, g);
    let b = boundary_points(gt, g);
    Ok(directed_sq(&a, &b).max(directed_sq(&b, &a)).sqrt())
}

/// Hausdorff distance in pixel units.
pub fn hausdorff_px(pred: &Mask, gt: &Mask) -> Result<f64> {
    hausdorff(pred, gt, &PixelGeometry::unit())
}

/// Per-case metric values. `hd_mm` is absent when either mask is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub patient_id: String,
    pub cohort_id: String,
    pub slice_index: u32,
    pub dsc: f64,
    pub hd_mm: Option<f64>,
    pub area_similarity: f64,
    pub perimeter_similarity: f64,
}

impl MetricReport {
    pub fn compute(
        patient_id: impl Into<String>,
        cohort_id: impl Into<String>,
        slice_index: u32,
        pred: &Mask,
        gt: &Mask,
        g: &PixelGeometry,
    ) -> Result<Self> {
        let hd_mm = match hausdorff(pred, gt, g) {
            Ok(v) => Some(v),
            Err(Error::EmptyMask) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            patient_id: patient_id.into(),
            cohort_id: cohort_id.into(),
            slice_index,
            dsc: dsc(pred, gt)?,
            hd_mm,
            area_similarity: area_similarity(pred, gt)?,
            perimeter_similarity: perimeter_similarity(pred, gt)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(size: usize, n: usize, top: usize, left: usize) -> Mask {
        Mask::from_fn(size, size, |r, c| {
            (top..top + n).contains(&r) && (left..left + n).contains(&c)
        })
        .unwrap()
    }

    fn pixels(size: usize, pts: &[(usize, usize)]) -> Mask {
        Mask::from_fn(size, size, |r, c| pts.contains(&(r, c))).unwrap()
    }

    #[test]
    fn boundary_counts() {
        assert_eq!(extract_boundary(&square(3, 3, 0, 0)).count(), 8);
        assert_eq!(extract_boundary(&square(9, 5, 2, 2)).count(), 16);
        let single = pixels(4, &[(2, 1)]);
        assert_eq!(extract_boundary(&single), single);
        assert!(extract_boundary(&Mask::zeros(3, 3).unwrap()).is_empty());
    }

    #[test]
    fn five_square_boundary_matches_neighbor_scan() {
        let m = square(7, 5, 1, 1);
        let mut oracle = 0;
        for r in 0..7i32 {
            for c in 0..7i32 {
                if !m.get(r as usize, c as usize) {
                    continue;
                }
                let inside = |rr: i32, cc: i32| {
                    (0..7).contains(&rr) && (0..7).contains(&cc) && m.get(rr as usize, cc as usize)
                };
                if !(inside(r - 1, c) && inside(r + 1, c) && inside(r, c - 1) && inside(r, c + 1)) {
                    oracle += 1;
                }
            }
        }
        assert_eq!(oracle, 16);
        assert_eq!(extract_boundary(&m).count(), oracle);
    }

    #[test]
    fn dsc_examples() {
        let a = square(4, 2, 0, 0);
        assert_eq!(dsc(&a, &a).unwrap(), 1.0);
        assert_eq!(dsc(&a, &square(4, 2, 2, 2)).unwrap(), 0.0);
        assert_eq!(dsc(&a, &square(4, 2, 1, 1)).unwrap(), 0.25);
        let e = Mask::zeros(4, 4).unwrap();
        assert_eq!(dsc(&e, &e).unwrap(), 1.0);
        assert!(matches!(
            dsc(&a, &Mask::zeros(3, 4).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hausdorff_examples() {
        let g = PixelGeometry::unit();
        let a = pixels(6, &[(0, 0)]);
        assert_eq!(hausdorff(&a, &a, &g).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &pixels(6, &[(3, 4)]), &g).unwrap(), 5.0);
        assert_eq!(
            hausdorff(&a, &pixels(6, &[(0, 0), (0, 3)]), &g).unwrap(),
            3.0
        );
        assert!(matches!(
            hausdorff(&a, &Mask::zeros(6, 6).unwrap(), &g),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn hausdorff_uses_physical_spacing() {
        let g = PixelGeometry::new(0.5, 2.0, 1.0).unwrap();
        let hd = hausdorff(&pixels(6, &[(0, 0)]), &pixels(6, &[(3, 4)]), &g).unwrap();
        assert!((hd - (4.0f64 + 36.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn area_similarity_examples() {
        let row = |n: usize| Mask::from_fn(10, 10, |r, c| r * 10 + c < n).unwrap();
        assert_eq!(area_similarity(&row(30), &row(50)).unwrap(), 0.75);
        assert_eq!(area_similarity(&row(0), &row(50)).unwrap(), 0.0);
        assert_eq!(
            area_similarity(&square(10, 3, 0, 0), &square(10, 3, 6, 5)).unwrap(),
            1.0
        );
        assert_eq!(area_similarity(&row(0), &row(0)).unwrap(), 1.0);
    }

    #[test]
    fn perimeter_similarity_examples() {
        let small = square(8, 3, 0, 0);
        let big = square(8, 5, 2, 2);
        assert!((perimeter_similarity(&small, &big).unwrap() - (1.0 - 8.0 / 24.0)).abs() < 1e-15);
        assert_eq!(perimeter_similarity(&small, &small).unwrap(), 1.0);
        assert_eq!(
            perimeter_similarity(&small, &square(8, 3, 4, 3)).unwrap(),
            1.0
        );
    }

    #[test]
    fn report_marks_missing_hd() {
        let gt = square(5, 2, 0, 0);
        let r = MetricReport::compute(
            "p",
            "c",
            0,
            &Mask::zeros(5, 5).unwrap(),
            &gt,
            &PixelGeometry::unit(),
        )
        .unwrap();
        assert_eq!(r.hd_mm, None);
        assert_eq!(r.dsc, 0.0);
        assert_eq!(r.area_similarity, 0.0);
    }
}
