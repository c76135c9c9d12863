//! Patient-level train/validation/test split stratified by scar burden.
//!
//! Each cohort is handled on its own. Patients are sorted by total scar
//! pixels and cut into quantile bins; every bin is shuffled with a seeded
//! stream and dealt into the three subsets according to per-bin quotas.
//! Quotas are chosen so that the cohort totals equal the largest-remainder
//! apportionment of the cohort size and, where the totals allow it, every
//! bin of three or more patients sends at least one patient to each subset.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::rng::{derive_seed, stream_rng};
use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];
pub const DEFAULT_BINS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Valid,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Valid, Subset::Test];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientBurden {
    pub patient_id: String,
    pub cohort_id: String,
    pub total_scar_px: u64,
}

/// Subset of every (cohort, patient) pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    entries: BTreeMap<(String, String), Subset>,
}

impl SplitAssignment {
    pub fn get(&self, cohort_id: &str, patient_id: &str) -> Option<Subset> {
        self.entries
            .get(&(cohort_id.to_owned(), patient_id.to_owned()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// ((cohort, patient), subset) in sorted key order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &Subset)> {
        self.entries.iter()
    }

    pub fn sizes(&self, cohort_id: &str) -> [usize; 3] {
        let mut out = [0; 3];
        for ((c, _), s) in &self.entries {
            if c == cohort_id {
                out[s.index()] += 1;
            }
        }
        out
    }

    /// `{patient_id: subset}`; fails if a patient id occurs in two cohorts.
    pub fn by_patient(&self) -> Result<BTreeMap<String, Subset>> {
        let mut out = BTreeMap::new();
        for ((cohort, patient), &s) in &self.entries {
            if out.insert(patient.clone(), s).is_some() {
                return Err(Error::InvalidData(format!(
                    "patient id {patient} appears in more than one cohort (last seen in {cohort})"
                )));
            }
        }
        Ok(out)
    }
}

fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    let ok = ratios.iter().all(|r| r.is_finite() && *r > 0.0)
        && (ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidRatios(ratios))
    }
}

/// Apportions `n` items by `ratios`: floors first, then one extra item to
/// each of the largest fractional remainders (earlier subset wins ties).
pub fn largest_remainder(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let ideal = ratios.map(|r| r * n as f64);
    // tolerance absorbs products like 0.15 * 20 = 2.9999999999999996
    let mut counts = ideal.map(|x| (x + 1e-9).floor() as usize);
    let mut order = [0usize, 1, 2];
    let rem = |i: usize| ideal[i] - counts[i] as f64;
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn floor_of(bin_len: usize, relaxed: bool) -> usize {
    usize::from(bin_len >= 3 && !relaxed)
}

/// Per-bin subset counts whose column sums equal `totals`.
fn bin_quotas(bin_lens: &[usize], ratios: [f64; 3], totals: [usize; 3]) -> Vec<[usize; 3]> {
    let mut quotas: Vec<[usize; 3]> = bin_lens
        .iter()
        .map(|&len| {
            let mut q = largest_remainder(len, ratios);
            if len >= 3 {
                for k in 0..3 {
                    if q[k] == 0 {
                        let donor = (0..3)
                            .max_by_key(|&j| (q[j], std::cmp::Reverse(j)))
                            .unwrap();
                        q[donor] -= 1;
                        q[k] += 1;
                    }
                }
            }
            q
        })
        .collect();

    let mut relaxed = false;
    loop {
        let sums: [usize; 3] = [0, 1, 2].map(|k| quotas.iter().map(|q| q[k]).sum());
        let Some(over) = (0..3).find(|&k| sums[k] > totals[k]) else {
            break;
        };
        let under = (0..3)
            .find(|&k| sums[k] < totals[k])
            .expect("sums match overall");
        // move one patient in the bin where `over` is most above its share
        let excess = |b: usize, k: usize| quotas[b][k] as f64 - bin_lens[b] as f64 * ratios[k];
        let candidate = (0..quotas.len())
            .filter(|&b| quotas[b][over] > floor_of(bin_lens[b], relaxed))
            .max_by(|&x, &y| {
                (excess(x, over) - excess(x, under))
                    .total_cmp(&(excess(y, over) - excess(y, under)))
                    .then(y.cmp(&x))
            });
        match candidate {
            Some(b) => {
                quotas[b][over] -= 1;
                quotas[b][under] += 1;
            }
            None => relaxed = true,
        }
    }
    quotas
}

pub fn stratified_split(
    burdens: &[PatientBurden],
    ratios: [f64; 3],
    n_bins: usize,
    seed: u64,
) -> Result<SplitAssignment> {
    check_ratios(ratios)?;
    if n_bins == 0 {
        return Err(Error::InvalidParameter("n_bins must be >= 1".into()));
    }
    let mut cohorts: BTreeMap<&str, Vec<&PatientBurden>> = BTreeMap::new();
    for b in burdens {
        if b.patient_id.is_empty() {
            return Err(Error::InvalidData("empty patient id".into()));
        }
        cohorts.entry(b.cohort_id.as_str()).or_default().push(b);
    }
    if cohorts.is_empty() {
        return Err(Error::EmptyCohort(String::new()));
    }

    let mut out = SplitAssignment::default();
    for (cohort_index, (cohort, mut patients)) in cohorts.into_iter().enumerate() {
        if patients.is_empty() {
            return Err(Error::EmptyCohort(cohort.to_owned()));
        }
        patients.sort_by(|a, b| {
            a.total_scar_px
                .cmp(&b.total_scar_px)
                .then_with(|| a.patient_id.cmp(&b.patient_id))
        });
        let mut ids = HashSet::new();
        if !patients.iter().all(|p| ids.insert(p.patient_id.as_str())) {
            return Err(Error::InvalidData(format!(
                "duplicate patient in cohort {cohort}"
            )));
        }
        let n = patients.len();
        let edges: Vec<usize> = (0..=n_bins).map(|i| i * n / n_bins).collect();
        let bin_lens: Vec<usize> = edges.windows(2).map(|e| e[1] - e[0]).collect();
        let quotas = bin_quotas(&bin_lens, ratios, largest_remainder(n, ratios));

        let cohort_seed = derive_seed(seed, cohort_index as u64);
        for (bin, q) in quotas.iter().enumerate() {
            let mut members = patients[edges[bin]..edges[bin + 1]].to_vec();
            members.shuffle(&mut stream_rng(cohort_seed, bin as u64));
            let labels = Subset::ALL
                .iter()
                .zip(q)
                .flat_map(|(&s, &count)| std::iter::repeat_n(s, count));
            for (p, s) in members.into_iter().zip(labels) {
                out.entries
                    .insert((cohort.to_owned(), p.patient_id.clone()), s);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(name: &str, burdens: &[u64]) -> Vec<PatientBurden> {
        burdens
            .iter()
            .enumerate()
            .map(|(i, &b)| PatientBurden {
                patient_id: format!("{name}-{i:03}"),
                cohort_id: name.to_owned(),
                total_scar_px: b,
            })
            .collect()
    }

    #[test]
    fn apportionment_examples() {
        assert_eq!(largest_remainder(20, DEFAULT_RATIOS), [14, 3, 3]);
        assert_eq!(largest_remainder(1, DEFAULT_RATIOS), [1, 0, 0]);
        assert_eq!(largest_remainder(12, DEFAULT_RATIOS), [8, 2, 2]);
        assert_eq!(largest_remainder(0, DEFAULT_RATIOS), [0, 0, 0]);
    }

    #[test]
    fn twenty_patients_split_14_3_3() {
        let ps = cohort("A", &(0..20).map(|i| i * 17 % 23).collect::<Vec<_>>());
        let s = stratified_split(&ps, DEFAULT_RATIOS, DEFAULT_BINS, 0).unwrap();
        assert_eq!(s.sizes("A"), [14, 3, 3]);
        assert_eq!(s.len(), 20);
    }

    #[test]
    fn single_patient_goes_to_train() {
        let s = stratified_split(&cohort("A", &[40]), DEFAULT_RATIOS, DEFAULT_BINS, 9).unwrap();
        assert_eq!(s.get("A", "A-000"), Some(Subset::Train));
    }

    #[test]
    fn deterministic_per_seed() {
        let ps = cohort("A", &(0..37).map(|i| i * i % 101).collect::<Vec<_>>());
        let a = stratified_split(&ps, DEFAULT_RATIOS, DEFAULT_BINS, 5).unwrap();
        assert_eq!(
            a,
            stratified_split(&ps, DEFAULT_RATIOS, DEFAULT_BINS, 5).unwrap()
        );
        assert_ne!(
            a,
            stratified_split(&ps, DEFAULT_RATIOS, DEFAULT_BINS, 6).unwrap()
        );
    }

    #[test]
    fn invalid_inputs() {
        let ps = cohort("A", &[1, 2, 3]);
        assert!(matches!(
            stratified_split(&ps, [0.5, 0.5, 0.0], 4, 0),
            Err(Error::InvalidRatios(_))
        ));
        assert!(matches!(
            stratified_split(&ps, [0.7, 0.2, 0.2], 4, 0),
            Err(Error::InvalidRatios(_))
        ));
        assert!(stratified_split(&ps, DEFAULT_RATIOS, 0, 0).is_err());
        assert!(matches!(
            stratified_split(&[], DEFAULT_RATIOS, 4, 0),
            Err(Error::EmptyCohort(_))
        ));
    }

    #[test]
    fn small_bins_each_feed_every_subset() {
        // 4 bins of 5 share only 3 valid slots, so one bin goes without
        let ps = cohort("A", &(0..20).collect::<Vec<_>>());
        let s = stratified_split(&ps, DEFAULT_RATIOS, 4, 1).unwrap();
        assert_eq!(s.sizes("A"), [14, 3, 3]);
        // 4 bins of 8: 22/5/5 can give every bin a valid and a test patient
        let ps = cohort("B", &(0..32).collect::<Vec<_>>());
        let s = stratified_split(&ps, DEFAULT_RATIOS, 4, 1).unwrap();
        for bin in 0..4 {
            let mut seen = [false; 3];
            for i in bin * 8..(bin + 1) * 8 {
                seen[s.get("B", &format!("B-{i:03}")).unwrap().index()] = true;
            }
            assert_eq!(seen, [true; 3], "bin {bin}");
        }
    }

    #[test]
    fn collision_across_cohorts_detected() {
        let mut ps = cohort("A", &[1, 2]);
        ps.push(PatientBurden {
            patient_id: "A-000".into(),
            cohort_id: "B".into(),
            total_scar_px: 4,
        });
        let s = stratified_split(&ps, DEFAULT_RATIOS, 4, 0).unwrap();
        assert!(s.by_patient().is_err());
    }
}
