//! Two-sided Wilcoxon rank-sum (Mann-Whitney) test.
//!
//! Ties receive mid-ranks. Small samples (the smaller group has at most 10
//! values and both together at most 25) use the exact permutation
//! distribution of the rank sum; larger ones use the normal approximation
//! with tie and continuity corrections.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const EXACT_MAX_SMALL: usize = 10;
const EXACT_MAX_TOTAL: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSumMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumTest {
    /// Sum of the mid-ranks of the first sample.
    pub rank_sum: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("rank-sum samples must be finite".into()));
    }
    Ok(())
}

/// Mid-ranks of `values` doubled so that they are integers.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // positions start..=end (0-based) share rank (start + end + 2) / 2
        for &i in &order[start..=end] {
            ranks[i] = (start + end + 2) as u64;
        }
        start = end + 1;
    }
    ranks
}

/// Mid-ranks (1-based) of the values.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    doubled_ranks(values)
        .into_iter()
        .map(|r| r as f64 / 2.0)
        .collect()
}

pub fn uses_exact(n_a: usize, n_b: usize) -> bool {
    n_a.min(n_b) <= EXACT_MAX_SMALL && n_a + n_b <= EXACT_MAX_TOTAL
}

fn pooled(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b).copied().collect()
}

/// Exact two-sided p: the share of all equally likely rank assignments whose
/// rank sum lies at least as far from its mean as the observed one.
pub fn exact_p_value(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let ranks = doubled_ranks(&pooled(a, b));
    let (na, n) = (a.len(), ranks.len());
    let observed: u64 = ranks[..na].iter().sum();
    let max_sum = ranks.iter().sum::<u64>() as usize;
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in &ranks {
        let r = r as usize;
        for k in (0..na).rev() {
            for s in (0..=max_sum - r).rev() {
                let w = ways[k][s];
                if w != 0.0 {
                    ways[k + 1][s + r] += w;
                }
            }
        }
    }
    // mean of the doubled-rank sum
    let center = (na * (n + 1)) as i64;
    let dev = |s: i64| (s - center).abs();
    let observed_dev = dev(observed as i64);
    let total: f64 = ways[na].iter().sum();
    let extreme: f64 = ways[na]
        .iter()
        .enumerate()
        .filter(|&(s, _)| dev(s as i64) >= observed_dev)
        .map(|(_, w)| w)
        .sum();
    Ok((extreme / total).min(1.0))
}

/// Normal approximation with tie-corrected variance and a continuity
/// correction of one half.
pub fn normal_p_value(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let all = pooled(a, b);
    let ranks = mid_ranks(&all);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let w: f64 = ranks[..a.len()].iter().sum();
    let mean = na * (n + 1.0) / 2.0;

    let mut sorted = all;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = if n > 1.0 {
        na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    check(a, b)?;
    let rank_sum = mid_ranks(&pooled(a, b))[..a.len()].iter().sum();
    let (p_value, method) = if uses_exact(a.len(), b.len()) {
        (exact_p_value(a, b)?, RankSumMethod::Exact)
    } else {
        (normal_p_value(a, b)?, RankSumMethod::Normal)
    };
    Ok(RankSumTest {
        rank_sum,
        p_value,
        method,
    })
}
