//! Cohort bookkeeping: patient-level splitting, metric aggregation and the
//! two-sample rank-sum test.

mod aggregate;
mod split;
mod wilcoxon;

pub use aggregate::{aggregate, AggregateRow, Summary, TOTAL_GROUP};
pub use split::{
    largest_remainder, stratified_split, PatientBurden, SplitAssignment, Subset, DEFAULT_BINS,
    DEFAULT_RATIOS,
};
pub use wilcoxon::{
    exact_p_value, mid_ranks, normal_p_value, uses_exact, wilcoxon_rank_sum, RankSumMethod,
    RankSumTest,
};
