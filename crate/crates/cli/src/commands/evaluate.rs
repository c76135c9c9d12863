use anyhow::Context;
use scarbench::io::load_mask;
use scarbench::metrics::MetricReport;
use scarbench::stats::{aggregate, AggregateRow, Summary};
use scarbench::CaseRecord;

use super::{header, id_cells};
use crate::fail::{CmdResult, Failure};
use crate::output::{csv_bytes, fmt_float, fmt_opt, CaseNote, OutDir, ReportBuilder};
use crate::{for_each_case, load_cases, skipped_notes, EvaluateArgs};

pub(crate) const PER_CASE_FILE: &str = "per_case.csv";
pub(crate) const AGGREGATE_FILE: &str = "aggregate.csv";

pub(crate) const PER_CASE_COLUMNS: [&str; 5] = [
    "dsc",
    "hd_mm",
    "area_similarity",
    "perimeter_similarity",
    "note",
];

pub(crate) const AGGREGATE_COLUMNS: [&str; 11] = [
    "group",
    "n_cases",
    "dsc_mean",
    "dsc_sd",
    "hd_mm_mean",
    "hd_mm_sd",
    "hd_n",
    "as_mean",
    "as_sd",
    "ps_mean",
    "ps_sd",
];

const EMPTY_HD_NOTE: &str = "hd undefined: empty mask";

fn evaluate_case(_: usize, c: &CaseRecord) -> anyhow::Result<MetricReport> {
    let pred_path = c
        .pred_path
        .as_deref()
        .context("manifest entry has no pred mask")?;
    let gt = load_mask(&c.mask_path)?;
    let pred = load_mask(pred_path)?;
    Ok(MetricReport::compute(
        c.patient_id.clone(),
        c.cohort_id.clone(),
        c.slice_index,
        &pred,
        &gt,
        &c.geometry,
    )?)
}

fn summary_cells(s: &Summary) -> [String; 2] {
    [fmt_opt(s.mean), fmt_opt(s.sd)]
}

fn aggregate_row(r: &AggregateRow) -> Vec<String> {
    let mut row = vec![r.group.clone(), r.n_cases.to_string()];
    row.extend(summary_cells(&r.dsc));
    row.extend(summary_cells(&r.hd_mm));
    row.push(r.hd_mm.n.to_string());
    row.extend(summary_cells(&r.area_similarity));
    row.extend(summary_cells(&r.perimeter_similarity));
    row
}

/// Skipped cases keep their row, with empty metric cells and the reason
/// in the note column.
fn per_case_row(c: &CaseRecord, outcome: &Result<MetricReport, CaseNote>) -> Vec<String> {
    let mut row = id_cells(c);
    match outcome {
        Ok(m) => row.extend([
            fmt_float(m.dsc),
            fmt_opt(m.hd_mm),
            fmt_float(m.area_similarity),
            fmt_float(m.perimeter_similarity),
            if m.hd_mm.is_none() {
                EMPTY_HD_NOTE.to_owned()
            } else {
                String::new()
            },
        ]),
        Err(note) => {
            row.extend(std::iter::repeat_n(
                String::new(),
                PER_CASE_COLUMNS.len() - 1,
            ));
            row.push(format!("skipped: {}", note.reason));
        }
    }
    row
}

pub(crate) fn run(a: EvaluateArgs) -> CmdResult<()> {
    let report = ReportBuilder::start("evaluate", 0);
    let cases = load_cases(&a.batch.manifest)?;
    let mut out = OutDir::create(&a.batch.out_dir)?;
    let outcomes = for_each_case(&cases, a.batch.workers, evaluate_case)?;

    let rows: Vec<Vec<String>> = cases
        .iter()
        .zip(&outcomes)
        .map(|(c, o)| per_case_row(c, o))
        .collect();
    out.write(
        PER_CASE_FILE,
        &csv_bytes(&header(&PER_CASE_COLUMNS), &rows)?,
    )?;

    let reports: Vec<MetricReport> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok().cloned())
        .collect();
    let table = aggregate(&reports).map_err(Failure::internal)?;
    let agg_rows: Vec<Vec<String>> = table.iter().map(aggregate_row).collect();
    out.write(AGGREGATE_FILE, &csv_bytes(&AGGREGATE_COLUMNS, &agg_rows)?)?;

    let warnings = cases
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| matches!(o, Ok(m) if m.hd_mm.is_none()))
        .map(|(c, _)| CaseNote {
            case: c.label(),
            reason: EMPTY_HD_NOTE.to_owned(),
        })
        .collect();
    let outputs = out.outputs();
    out.write_report(&report.finish(cases.len(), skipped_notes(&outcomes), warnings, outputs))
}
