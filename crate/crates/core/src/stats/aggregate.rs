//! Mean and standard deviation of per-case metrics by cohort and overall.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::MetricReport;

pub const TOTAL_GROUP: &str = "Total";

/// Mean and sample SD (n - 1 denominator) of one metric column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl Summary {
    /// Values are summed in sorted order so the result does not depend on
    /// input order. A single value has SD 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: None,
                sd: None,
                n,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let sd = if n == 1 {
            0.0
        } else {
            let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self {
            mean: Some(mean),
            sd: Some(sd),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub group: String,
    pub n_cases: usize,
    pub dsc: Summary,
    /// Only cases with a defined Hausdorff distance contribute.
    pub hd_mm: Summary,
    pub area_similarity: Summary,
    pub perimeter_similarity: Summary,
}

fn row(group: &str, reports: &[&MetricReport]) -> AggregateRow {
    let column = |f: fn(&MetricReport) -> f64| {
        Summary::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>())
    };
    AggregateRow {
        group: group.to_owned(),
        n_cases: reports.len(),
        dsc: column(|r| r.dsc),
        hd_mm: Summary::of(&reports.iter().filter_map(|r| r.hd_mm).collect::<Vec<_>>()),
        area_similarity: column(|r| r.area_similarity),
        perimeter_similarity: column(|r| r.perimeter_similarity),
    }
}

/// One row per cohort (sorted by cohort id) followed by the total row.
pub fn aggregate(reports: &[MetricReport]) -> Result<Vec<AggregateRow>> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut groups: BTreeMap<&str, Vec<&MetricReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.cohort_id.as_str()).or_default().push(r);
    }
    let mut rows: Vec<AggregateRow> = groups.iter().map(|(g, rs)| row(g, rs)).collect();
    rows.push(row(TOTAL_GROUP, &reports.iter().collect::<Vec<_>>()));
    Ok(rows)
}
