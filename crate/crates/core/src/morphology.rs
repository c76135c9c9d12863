//! Lesion shape features and scar mass.
//!
//! Perimeters are crack lengths: the number of pixel edges separating
//! foreground from background or from the image border. Under this
//! perimeter a digital shape can never beat the square, so circularity is
//! bounded by pi/4 on the pixel grid.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Mask, PixelGeometry};

/// Myocardial tissue density in g/mL.
pub const MYOCARDIAL_DENSITY: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            other => Err(Error::InvalidParameter(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Self::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Self::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Component labels, 0 for background and 1..=count for lesions, numbered
/// in row-major order of each component's first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub count: usize,
    pub width: usize,
    pub labels: Vec<u32>,
}

impl Labeling {
    /// Pixel coordinates (row, col) of each component.
    pub fn components(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push((i / self.width, i % self.width));
            }
        }
        out
    }
}

pub fn connected_components(m: &Mask, connectivity: Connectivity) -> Labeling {
    let (w, h) = m.dims();
    let mut labels = vec![0u32; w * h];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if m.data()[start] == 0 || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for &(dr, dc) in connectivity.offsets() {
                let (nr, nc) = (r + dr, c + dc);
                if m.get_signed(nr, nc) {
                    let j = nr as usize * w + nc as usize;
                    if labels[j] == 0 {
                        labels[j] = count;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    Labeling {
        count: count as usize,
        width: w,
        labels,
    }
}

/// Crack-length perimeter. Edges between vertically adjacent pixels run
/// horizontally and weigh `spacing_x`; the others weigh `spacing_y`.
pub fn perimeter_length(m: &Mask, g: &PixelGeometry) -> f64 {
    let mut horizontal = 0usize;
    let mut vertical = 0usize;
    for (r, c) in m.foreground() {
        let (r, c) = (r as isize, c as isize);
        horizontal += usize::from(!m.get_signed(r - 1, c)) + usize::from(!m.get_signed(r + 1, c));
        vertical += usize::from(!m.get_signed(r, c - 1)) + usize::from(!m.get_signed(r, c + 1));
    }
    horizontal as f64 * g.spacing_x + vertical as f64 * g.spacing_y
}

type Pt = (i64, i64);

fn cross(o: Pt, a: Pt, b: Pt) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, no collinear vertices) by monotone chain.
fn convex_hull(points: &[Pt]) -> Vec<Pt> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Pt>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn on_segment(a: Pt, b: Pt, p: Pt) -> bool {
    cross(a, b, p) == 0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

fn in_hull(hull: &[Pt], p: Pt) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => on_segment(hull[0], hull[1], p),
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}

/// Number of grid points inside or on the convex hull of `pixels`.
pub fn hull_pixel_area(pixels: &[(usize, usize)]) -> usize {
    let pts: Vec<Pt> = pixels.iter().map(|&(r, c)| (c as i64, r as i64)).collect();
    let hull = convex_hull(&pts);
    let (x0, x1) = (
        hull.iter().map(|p| p.0).min(),
        hull.iter().map(|p| p.0).max(),
    );
    let (y0, y1) = (
        hull.iter().map(|p| p.1).min(),
        hull.iter().map(|p| p.1).max(),
    );
    let (Some(x0), Some(x1), Some(y0), Some(y1)) = (x0, x1, y0, y1) else {
        return 0;
    };
    (y0..=y1)
        .flat_map(|y| (x0..=x1).map(move |x| (x, y)))
        .filter(|&p| in_hull(&hull, p))
        .count()
}

/// Area-weighted mean of per-component area / rasterized hull area.
pub fn solidity(m: &Mask, connectivity: Connectivity) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    let comps = connected_components(m, connectivity).components();
    let total: usize = comps.iter().map(Vec::len).sum();
    Ok(comps
        .iter()
        .map(|c| {
            let weight = c.len() as f64 / total as f64;
            weight * (c.len() as f64 / hull_pixel_area(c) as f64)
        })
        .sum())
}

/// 4 pi A / P^2 over the whole foreground, in physical units.
pub fn circularity(m: &Mask, g: &PixelGeometry) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    let area = m.count() as f64 * g.pixel_area_mm2();
    let perimeter = perimeter_length(m, g);
    Ok(4.0 * PI * area / (perimeter * perimeter))
}

/// Scar volume over all slices converted to grams at `density` g/mL.
pub fn scar_mass(cases: &[(Mask, PixelGeometry)], density: f64) -> Result<f64> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "density must be positive, got {density}"
        )));
    }
    let mut volume_mm3 = 0.0;
    for (m, g) in cases {
        g.validate()?;
        volume_mm3 += m.count() as f64 * g.spacing_x * g.spacing_y * g.slice_thickness;
    }
    Ok(volume_mm3 / 1000.0 * density)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub scar_size_px: usize,
    pub scar_area_mm2: f64,
    pub n_components: usize,
    pub solidity: Option<f64>,
    pub circularity: Option<f64>,
    pub perimeter_mm: f64,
}

pub fn feature_vector(m: &Mask, g: &PixelGeometry, connectivity: Connectivity) -> FeatureVector {
    let nonempty = !m.is_empty();
    FeatureVector {
        scar_size_px: m.count(),
        scar_area_mm2: m.count() as f64 * g.pixel_area_mm2(),
        n_components: connected_components(m, connectivity).count,
        solidity: nonempty.then(|| solidity(m, connectivity).expect("nonempty")),
        circularity: nonempty.then(|| circularity(m, g).expect("nonempty")),
        perimeter_mm: perimeter_length(m, g),
    }
}
