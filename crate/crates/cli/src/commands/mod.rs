pub(crate) mod augment;
pub(crate) mod evaluate;
pub(crate) mod features;
pub(crate) mod fwhm;
pub(crate) mod gradcheck;
pub(crate) mod loss;
pub(crate) mod split;

use scarbench::CaseRecord;

/// Leading identifier columns shared by every per-case CSV.
pub(crate) const ID_COLUMNS: [&str; 3] = ["patient_id", "cohort_id", "slice_index"];

pub(crate) fn id_cells(c: &CaseRecord) -> Vec<String> {
    vec![
        c.patient_id.clone(),
        c.cohort_id.clone(),
        c.slice_index.to_string(),
    ]
}

pub(crate) fn header(extra: &[&'static str]) -> Vec<&'static str> {
    ID_COLUMNS.iter().chain(extra).copied().collect()
}
