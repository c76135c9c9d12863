use std::collections::BTreeMap;

use scarbench::io::load_mask;
use scarbench::stats::{stratified_split, PatientBurden, DEFAULT_RATIOS};
use scarbench::CaseRecord;

use crate::fail::{CmdResult, Failure};
use crate::output::{json_bytes, OutDir, ReportBuilder};
use crate::{for_each_case, load_cases, skipped_notes, SplitArgs};

pub(crate) const SPLIT_FILE: &str = "split.json";

/// Burden of a patient is the ground-truth scar pixel count summed over
/// every slice that could be read.
pub(crate) fn run(a: SplitArgs) -> CmdResult<()> {
    let report = ReportBuilder::start("split", a.seed);
    if a.bins == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--bins must be at least 1")));
    }
    let cases = load_cases(&a.manifest)?;
    let mut out = OutDir::create(&a.out_dir)?;
    let outcomes = for_each_case(&cases, None, |_, c: &CaseRecord| {
        Ok(load_mask(&c.mask_path)?.count())
    })?;

    let mut burdens: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (c, o) in cases.iter().zip(&outcomes) {
        if let Ok(n) = o {
            *burdens.entry((&c.cohort_id, &c.patient_id)).or_default() += *n as u64;
        }
    }
    let burdens: Vec<PatientBurden> = burdens
        .into_iter()
        .map(|((cohort, patient), px)| PatientBurden {
            patient_id: patient.to_owned(),
            cohort_id: cohort.to_owned(),
            total_scar_px: px,
        })
        .collect();
    let split =
        stratified_split(&burdens, DEFAULT_RATIOS, a.bins, a.seed).map_err(Failure::usage)?;
    // keyed by patient id alone, so ids must be unique across cohorts
    let by_patient = split.by_patient().map_err(Failure::manifest)?;
    out.write(SPLIT_FILE, &json_bytes(&by_patient)?)?;

    let outputs = out.outputs();
    out.write_report(&report.finish(cases.len(), skipped_notes(&outcomes), Vec::new(), outputs))
}
