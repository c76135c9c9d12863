use std::collections::BTreeMap;

use anyhow::Context;
use scarbench::io::load_mask;
use scarbench::morphology::{feature_vector, scar_mass, Connectivity, FeatureVector};
use scarbench::CaseRecord;

use super::{header, id_cells};
use crate::fail::{CmdResult, Failure};
use crate::output::{csv_bytes, fmt_float, fmt_opt, OutDir, ReportBuilder};
use crate::{for_each_case, load_cases, skipped_notes, FeaturesArgs, MaskSource};

pub(crate) const SLICE_FILE: &str = "features.csv";
pub(crate) const PATIENT_FILE: &str = "patient_features.csv";

const FEATURE_COLUMNS: [&str; 7] = [
    "scar_size_px",
    "scar_area_mm2",
    "n_components",
    "solidity",
    "circularity",
    "perimeter_mm",
    "scar_mass_g",
];

struct SliceFeatures {
    features: FeatureVector,
    mass_g: f64,
}

fn feature_cells(f: &FeatureVector, mass_g: f64) -> [String; 7] {
    [
        f.scar_size_px.to_string(),
        fmt_float(f.scar_area_mm2),
        f.n_components.to_string(),
        fmt_opt(f.solidity),
        fmt_opt(f.circularity),
        fmt_float(f.perimeter_mm),
        fmt_float(mass_g),
    ]
}

/// Sums the extensive features of one patient's slices; solidity and
/// circularity are averaged with scar area as the weight.
fn patient_total(slices: &[&SliceFeatures]) -> (FeatureVector, f64) {
    let mut total = FeatureVector {
        scar_size_px: 0,
        scar_area_mm2: 0.0,
        n_components: 0,
        solidity: None,
        circularity: None,
        perimeter_mm: 0.0,
    };
    let mut mass = 0.0;
    let (mut sol, mut circ, mut weight) = (0.0, 0.0, 0.0);
    for s in slices {
        let f = &s.features;
        total.scar_size_px += f.scar_size_px;
        total.scar_area_mm2 += f.scar_area_mm2;
        total.n_components += f.n_components;
        total.perimeter_mm += f.perimeter_mm;
        mass += s.mass_g;
        if let (Some(so), Some(ci)) = (f.solidity, f.circularity) {
            sol += f.scar_area_mm2 * so;
            circ += f.scar_area_mm2 * ci;
            weight += f.scar_area_mm2;
        }
    }
    if weight > 0.0 {
        total.solidity = Some(sol / weight);
        total.circularity = Some(circ / weight);
    }
    (total, mass)
}

pub(crate) fn run(a: FeaturesArgs) -> CmdResult<()> {
    let report = ReportBuilder::start("features", 0);
    let connectivity = Connectivity::from_count(a.connectivity).map_err(Failure::usage)?;
    if !(a.density.is_finite() && a.density > 0.0) {
        return Err(Failure::usage(anyhow::anyhow!(
            "--density must be positive"
        )));
    }
    let cases = load_cases(&a.batch.manifest)?;
    let mut out = OutDir::create(&a.batch.out_dir)?;
    let source = a.source;
    let density = a.density;
    let outcomes = for_each_case(&cases, a.batch.workers, |_, c: &CaseRecord| {
        let path = match source {
            MaskSource::Mask => c.mask_path.as_path(),
            MaskSource::Pred => c
                .pred_path
                .as_deref()
                .context("manifest entry has no pred mask")?,
        };
        let m = load_mask(path)?;
        let features = feature_vector(&m, &c.geometry, connectivity);
        let mass_g = scar_mass(&[(m, c.geometry)], density)?;
        Ok(SliceFeatures { features, mass_g })
    })?;

    let mut rows = Vec::new();
    let mut patients: BTreeMap<(&str, &str), Vec<&SliceFeatures>> = BTreeMap::new();
    for (c, o) in cases.iter().zip(&outcomes) {
        if let Ok(s) = o {
            let mut row = id_cells(c);
            row.extend(feature_cells(&s.features, s.mass_g));
            rows.push(row);
            patients
                .entry((c.cohort_id.as_str(), c.patient_id.as_str()))
                .or_default()
                .push(s);
        }
    }
    out.write(SLICE_FILE, &csv_bytes(&header(&FEATURE_COLUMNS), &rows)?)?;

    let patient_rows: Vec<Vec<String>> = patients
        .iter()
        .map(|((cohort, patient), slices)| {
            let (total, mass) = patient_total(slices);
            let mut row = vec![
                patient.to_string(),
                cohort.to_string(),
                slices.len().to_string(),
            ];
            row.extend(feature_cells(&total, mass));
            row
        })
        .collect();
    let patient_header: Vec<&str> = ["patient_id", "cohort_id", "n_slices"]
        .into_iter()
        .chain(FEATURE_COLUMNS)
        .collect();
    out.write(PATIENT_FILE, &csv_bytes(&patient_header, &patient_rows)?)?;

    let outputs = out.outputs();
    out.write_report(&report.finish(cases.len(), skipped_notes(&outcomes), Vec::new(), outputs))
}
