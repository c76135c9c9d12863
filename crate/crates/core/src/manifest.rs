//! JSON case manifest.
//!
//! The manifest is an array of objects, one per slice:
//!
//! ```json
//! [{"patient_id": "p01", "cohort_id": "A", "slice_index": 3,
//!   "image": "img/p01_3.pgm", "mask": "gt/p01_3.pgm",
//!   "pred": "pred/p01_3.pgm", "scores": "scores/p01_3.f32",
//!   "spacing_x_mm": 1.25, "spacing_y_mm": 1.25, "slice_thickness_mm": 8.0}]
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PixelGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub cohort_id: String,
    pub slice_index: u32,
    pub image: PathBuf,
    pub mask: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    pub spacing_x_mm: f64,
    pub spacing_y_mm: f64,
    pub slice_thickness_mm: f64,
}

/// One slice of one patient, with resolved file paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub patient_id: String,
    pub cohort_id: String,
    pub slice_index: u32,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub pred_path: Option<PathBuf>,
    pub scores_path: Option<PathBuf>,
    pub geometry: PixelGeometry,
}

impl CaseRecord {
    /// Short identifier used in logs and output file names.
    pub fn label(&self) -> String {
        format!(
            "{}_{}_{}",
            self.cohort_id, self.patient_id, self.slice_index
        )
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<CaseRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<CaseRecord>> {
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut seen = HashSet::new();
    let resolve = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut records = Vec::with_capacity(entries.len());
    for (index, e) in entries.into_iter().enumerate() {
        if e.patient_id.is_empty() {
            return Err(Error::InvalidRecord {
                index,
                reason: "empty patient_id".into(),
            });
        }
        for (name, p) in [("image", Some(&e.image)), ("mask", Some(&e.mask))]
            .into_iter()
            .chain([("pred", e.pred.as_ref()), ("scores", e.scores.as_ref())])
        {
            if p.is_some_and(|p| p.as_os_str().is_empty()) {
                return Err(Error::InvalidRecord {
                    index,
                    reason: format!("empty {name} path"),
                });
            }
        }
        let geometry = PixelGeometry::new(e.spacing_x_mm, e.spacing_y_mm, e.slice_thickness_mm)
            .map_err(|err| match err {
                Error::InvalidGeometry(msg) => {
                    Error::InvalidGeometry(format!("entry {index}: {msg}"))
                }
                other => other,
            })?;
        let key = (e.patient_id.clone(), e.cohort_id.clone(), e.slice_index);
        if !seen.insert(key) {
            return Err(Error::DuplicateCase {
                patient_id: e.patient_id,
                cohort_id: e.cohort_id,
                slice_index: e.slice_index,
            });
        }
        records.push(CaseRecord {
            image_path: resolve(&e.image),
            mask_path: resolve(&e.mask),
            pred_path: e.pred.as_deref().map(resolve),
            scores_path: e.scores.as_deref().map(resolve),
            patient_id: e.patient_id,
            cohort_id: e.cohort_id,
            slice_index: e.slice_index,
            geometry,
        });
    }
    Ok(records)
}
