use std::fs;

use scarbench::augment::rng::derive_seed;
use scarbench::augment::{apply, AugmentSpec};
use scarbench::io::{encode_image, encode_mask, load_image, load_mask};
use scarbench::resample::{resample_image, resample_mask};
use scarbench::CaseRecord;

use super::{header, id_cells};
use crate::fail::{CmdResult, Failure};
use crate::output::{csv_bytes, OutDir, ReportBuilder};
use crate::{for_each_case, load_cases, skipped_notes, AugmentArgs};

pub(crate) const INDEX_FILE: &str = "augment.csv";

const COLUMNS: [&str; 10] = [
    "seed",
    "width",
    "height",
    "bbox_x_min",
    "bbox_y_min",
    "bbox_x_max",
    "bbox_y_max",
    "image",
    "mask",
    "note",
];

struct AugmentedCase {
    seed: u64,
    dims: (usize, usize),
    bbox: Option<[usize; 4]>,
    image_pgm: Vec<u8>,
    mask_pgm: Vec<u8>,
}

/// File-name-safe version of a case label.
fn file_stem(c: &CaseRecord) -> String {
    c.label()
        .chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || "-_.".contains(ch) {
                ch
            } else {
                '_'
            }
        })
        .collect()
}

fn read_spec(a: &AugmentArgs) -> CmdResult<AugmentSpec> {
    let text = fs::read_to_string(&a.spec).map_err(|e| {
        Failure::usage(anyhow::anyhow!(
            "cannot read spec {}: {e}",
            a.spec.display()
        ))
    })?;
    let mut spec = AugmentSpec::from_json(&text).map_err(Failure::usage)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

pub(crate) fn run(a: AugmentArgs) -> CmdResult<()> {
    let spec = read_spec(&a)?;
    let report = ReportBuilder::start("augment", spec.seed);
    let cases = load_cases(&a.batch.manifest)?;
    let mut out = OutDir::create(&a.batch.out_dir)?;
    let resize = a.resize;

    let outcomes = for_each_case(&cases, a.batch.workers, |i, c: &CaseRecord| {
        let mut image = load_image(&c.image_path)?;
        let mut mask = load_mask(&c.mask_path)?;
        if image.dims() != mask.dims() {
            anyhow::bail!("image is {:?} but mask is {:?}", image.dims(), mask.dims());
        }
        if let Some((w, h)) = resize {
            image = resample_image(&image, &c.geometry, w, h)?.0;
            mask = resample_mask(&mask, &c.geometry, w, h)?.0;
        }
        let case_spec = AugmentSpec {
            steps: spec.steps.clone(),
            seed: derive_seed(spec.seed, i as u64),
        };
        let result = apply(&image, &mask, &case_spec)?;
        Ok(AugmentedCase {
            seed: case_spec.seed,
            dims: result.image.dims(),
            bbox: result.bbox.map(|b| [b.x_min, b.y_min, b.x_max, b.y_max]),
            image_pgm: encode_image(&result.image),
            mask_pgm: encode_mask(&result.mask),
        })
    })?;

    let mut rows = Vec::new();
    for (c, o) in cases.iter().zip(&outcomes) {
        let mut row = id_cells(c);
        match o {
            Ok(r) => {
                let stem = file_stem(c);
                let image_name = format!("images/{stem}.pgm");
                let mask_name = format!("masks/{stem}.pgm");
                out.write(&image_name, &r.image_pgm)?;
                out.write(&mask_name, &r.mask_pgm)?;
                let bbox = r
                    .bbox
                    .map_or([const { String::new() }; 4], |b| b.map(|v| v.to_string()));
                row.extend([
                    r.seed.to_string(),
                    r.dims.0.to_string(),
                    r.dims.1.to_string(),
                ]);
                row.extend(bbox);
                row.extend([image_name, mask_name, String::new()]);
            }
            Err(note) => {
                row.extend(std::iter::repeat_n(String::new(), COLUMNS.len() - 1));
                row.push(format!("skipped: {}", note.reason));
            }
        }
        rows.push(row);
    }
    out.write(INDEX_FILE, &csv_bytes(&header(&COLUMNS), &rows)?)?;

    let outputs = out.outputs();
    out.write_report(&report.finish(cases.len(), skipped_notes(&outcomes), Vec::new(), outputs))
}
