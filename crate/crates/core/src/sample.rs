//! Sample spaces over observed query names and their length histograms.
//!
//! Two spaces drive the detection model: the domain-name sample space (DNSS)
//! records each distinct name once, the accessing domain-name sample space
//! (ADNSS) weights every name by its access count.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ingest::QueryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpaceKind {
    /// Each distinct name counted once.
    Dnss,
    /// Names weighted by access count.
    Adnss,
}

/// A sample space of query names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSampleSpace {
    kind: SpaceKind,
    entries: BTreeMap<String, u64>,
    capacity: u64,
}

impl DomainSampleSpace {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Total samples: number of entries for DNSS, sum of counts for ADNSS.
    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Number of distinct names.
    pub fn distinct(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn count_of(&self, qname: &str) -> u64 {
        self.entries.get(qname).copied().unwrap_or(0)
    }

    /// Kish effective sample size (Σc)²/Σc², the equivalent number of
    /// independent draws once per-name replication is accounted for.
    /// Equals the capacity when every count is 1.
    pub fn effective_n(&self) -> f64 {
        let sum: f64 = self.capacity as f64;
        let sum_sq: f64 = self.entries.values().map(|&c| (c as f64) * (c as f64)).sum();
        if sum_sq <= 0.0 {
            0.0
        } else {
            sum * sum / sum_sq
        }
    }
}

/// (name, access count) runs from a sorted name list.
fn counted_runs(mut names: Vec<&str>) -> Vec<(String, u64)> {
    names.sort_unstable();
    let mut runs: Vec<(String, u64)> = Vec::new();
    for name in names {
        match runs.last_mut() {
            Some((prev, count)) if prev == name => *count += 1,
            _ => runs.push((String::from(name), 1)),
        }
    }
    runs
}

/// Folds a record stream into a sample space. Deterministic for any ordering
/// of the same record multiset.
pub fn build_space<'a, I>(records: I, kind: SpaceKind) -> DomainSampleSpace
where
    I: IntoIterator<Item = &'a QueryRecord>,
{
    let names: Vec<&str> = records.into_iter().map(|r| r.qname.as_str()).collect();
    let total = names.len() as u64;
    let runs = counted_runs(names);
    let distinct = runs.len() as u64;
    let entries: BTreeMap<String, u64> = match kind {
        SpaceKind::Dnss => runs.into_iter().map(|(name, _)| (name, 1)).collect(),
        SpaceKind::Adnss => runs.into_iter().collect(),
    };
    let capacity = match kind {
        SpaceKind::Dnss => distinct,
        SpaceKind::Adnss => total,
    };
    DomainSampleSpace { kind, entries, capacity }
}

/// Builds both spaces over one pass (one shared sort).
pub fn build_spaces<'a, I>(records: I) -> (DomainSampleSpace, DomainSampleSpace)
where
    I: IntoIterator<Item = &'a QueryRecord>,
{
    let names: Vec<&str> = records.into_iter().map(|r| r.qname.as_str()).collect();
    let total = names.len() as u64;
    let runs = counted_runs(names);
    let distinct = runs.len() as u64;
    let dnss_entries: BTreeMap<String, u64> =
        runs.iter().map(|(name, _)| (name.clone(), 1)).collect();
    let adnss_entries: BTreeMap<String, u64> = runs.into_iter().collect();
    (
        DomainSampleSpace { kind: SpaceKind::Dnss, entries: dnss_entries, capacity: distinct },
        DomainSampleSpace { kind: SpaceKind::Adnss, entries: adnss_entries, capacity: total },
    )
}

/// Frequency of each name length. Keys are present only where the count is
/// nonzero; consumers treat missing keys as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthHistogram {
    counts: BTreeMap<u32, u64>,
    n: u64,
    /// Distinct names behind the counts (equals `n` for unweighted data).
    distinct: u64,
    /// Kish effective sample size of the underlying space.
    effective_n: f64,
}

impl LengthHistogram {
    /// Histogram over raw counts, treated as unweighted samples.
    pub fn from_counts<I: IntoIterator<Item = (u32, u64)>>(counts: I) -> Self {
        let mut map = BTreeMap::new();
        let mut n = 0u64;
        for (len, c) in counts {
            if c == 0 || len == 0 {
                continue;
            }
            *map.entry(len).or_insert(0) += c;
            n += c;
        }
        LengthHistogram { counts: map, n, distinct: n, effective_n: n as f64 }
    }

    pub fn count(&self, length: u32) -> u64 {
        self.counts.get(&length).copied().unwrap_or(0)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn distinct(&self) -> u64 {
        self.distinct
    }

    pub fn effective_n(&self) -> f64 {
        self.effective_n
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(k, v)| (*k, *v))
    }

    /// Number of lengths with nonzero counts.
    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    /// Smallest and largest length with a nonzero count.
    pub fn hull(&self) -> Option<(u32, u32)> {
        let min = *self.counts.keys().next()?;
        let max = *self.counts.keys().next_back()?;
        Some((min, max))
    }
}

/// Builds the length histogram of a space: DNSS weights each unique name
/// once, ADNSS weights by access count. Zero-length (root) names carry no
/// length information and are skipped.
pub fn length_histogram(space: &DomainSampleSpace) -> LengthHistogram {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut n = 0u64;
    for (name, c) in space.entries() {
        let len = name.len() as u32;
        if len == 0 {
            continue;
        }
        let w = match space.kind() {
            SpaceKind::Dnss => 1,
            SpaceKind::Adnss => c,
        };
        *counts.entry(len).or_insert(0) += w;
        n += w;
    }
    LengthHistogram { counts, n, distinct: space.distinct(), effective_n: space.effective_n() }
}

/// The cumulative step function S(x) = (samples with length ≤ x) / n.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    /// (length, cumulative count), ascending.
    steps: Vec<(u32, u64)>,
    n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyHistogram;

impl fmt::Display for EmptyHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "empirical CDF of an empty histogram")
    }
}

impl core::error::Error for EmptyHistogram {}

impl EmpiricalCdf {
    /// Builds directly from (length, count) pairs; useful for tests.
    pub fn from_counts<I: IntoIterator<Item = (u32, u64)>>(
        counts: I,
    ) -> Result<Self, EmptyHistogram> {
        let mut map: BTreeMap<u32, u64> = BTreeMap::new();
        for (len, c) in counts {
            *map.entry(len).or_insert(0) += c;
        }
        let mut steps = Vec::with_capacity(map.len());
        let mut cum = 0u64;
        for (len, c) in map {
            cum += c;
            steps.push((len, cum));
        }
        if cum == 0 {
            return Err(EmptyHistogram);
        }
        Ok(EmpiricalCdf { steps, n: cum })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// S(x): right-continuous, 0 below the support, 1 at and above the max.
    pub fn eval(&self, x: u32) -> f64 {
        // last step with length <= x
        let idx = self.steps.partition_point(|&(len, _)| len <= x);
        if idx == 0 {
            0.0
        } else {
            self.steps[idx - 1].1 as f64 / self.n as f64
        }
    }
}

/// The empirical CDF of a histogram.
pub fn empirical_cdf(hist: &LengthHistogram) -> Result<EmpiricalCdf, EmptyHistogram> {
    EmpiricalCdf::from_counts(hist.iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str) -> QueryRecord {
        QueryRecord::new(0, name, 1, None)
    }

    #[test]
    fn dnss_deduplicates() {
        let records = [rec("a.com"), rec("a.com"), rec("b.net")];
        let s = build_space(records.iter(), SpaceKind::Dnss);
        assert_eq!(s.distinct(), 2);
        assert_eq!(s.capacity(), 2);
        assert_eq!(s.count_of("a.com"), 1);
    }

    #[test]
    fn adnss_counts() {
        let records = [rec("a.com"), rec("a.com"), rec("b.net")];
        let s = build_space(records.iter(), SpaceKind::Adnss);
        assert_eq!(s.count_of("a.com"), 2);
        assert_eq!(s.count_of("b.net"), 1);
        assert_eq!(s.capacity(), 3);
        assert!(s.capacity() >= s.distinct());
    }

    #[test]
    fn histogram_weighting() {
        let records = [rec("a.com"), rec("bb.com")];
        let s = build_space(records.iter(), SpaceKind::Dnss);
        let h = length_histogram(&s);
        assert_eq!(h.count(5), 1);
        assert_eq!(h.count(6), 1);
        assert_eq!(h.n(), 2);

        let records = [rec("a.com"), rec("a.com"), rec("a.com"), rec("bb.com")];
        let s = build_space(records.iter(), SpaceKind::Adnss);
        let h = length_histogram(&s);
        assert_eq!(h.count(5), 3);
        assert_eq!(h.count(6), 1);
        assert_eq!(h.n(), 4);
        assert_eq!(h.distinct(), 2);
    }

    #[test]
    fn histogram_total_matches_capacity() {
        let records = [rec("a.com"), rec("a.com"), rec("xy.org"), rec("z.io")];
        for kind in [SpaceKind::Dnss, SpaceKind::Adnss] {
            let s = build_space(records.iter(), kind);
            let h = length_histogram(&s);
            assert_eq!(h.n(), s.capacity());
        }
    }

    #[test]
    fn effective_n_unweighted_equals_capacity() {
        let records = [rec("a.com"), rec("bb.com"), rec("ccc.com")];
        let s = build_space(records.iter(), SpaceKind::Adnss);
        assert!((s.effective_n() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn effective_n_shrinks_under_replication() {
        let mut records = alloc::vec![rec("hot.com"); 100];
        records.push(rec("cold.net"));
        let s = build_space(records.iter(), SpaceKind::Adnss);
        // (101)^2 / (100^2 + 1) ≈ 1.02: one dominant cluster
        assert!(s.effective_n() < 1.1, "effective_n = {}", s.effective_n());
    }

    #[test]
    fn cdf_two_lengths() {
        let cdf = EmpiricalCdf::from_counts([(5u32, 1u64), (6, 1)]).unwrap();
        assert_eq!(cdf.eval(4), 0.0);
        assert_eq!(cdf.eval(5), 0.5);
        assert_eq!(cdf.eval(6), 1.0);
        assert_eq!(cdf.eval(100), 1.0);
    }

    #[test]
    fn cdf_single_length() {
        let cdf = EmpiricalCdf::from_counts([(10u32, 7u64)]).unwrap();
        assert_eq!(cdf.eval(9), 0.0);
        assert_eq!(cdf.eval(10), 1.0);
    }

    #[test]
    fn cdf_empty_rejected() {
        assert!(EmpiricalCdf::from_counts(core::iter::empty::<(u32, u64)>()).is_err());
    }

    #[test]
    fn cdf_times_n_is_integral() {
        let counts = [(4u32, 3u64), (7, 2), (9, 5)];
        let cdf = EmpiricalCdf::from_counts(counts).unwrap();
        for x in 0..12 {
            let v = cdf.eval(x) * cdf.n() as f64;
            assert!((v - libm::round(v)).abs() < 1e-9);
        }
    }
}
