//! Time-window cutting, per-window detection, the burr heat map, and the
//! sudden-burr difference sets between adjacent windows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::burr::{band_table, delineation_band, detect_burrs, burr_domains, BandRow, BurrMode, BurrPoint};
use crate::fit::{fit_gaussian, GaussianFit};
use crate::ingest::QueryRecord;
use crate::sample::{build_spaces, length_histogram};

pub const MICROS_PER_DAY: i64 = 86_400_000_000;
/// Below this duration the fit rarely stabilizes.
pub const WARN_BELOW_US: i64 = 7 * MICROS_PER_DAY;
/// Below this duration fits may be unstable; 30 days is the default.
pub const CAUTION_BELOW_US: i64 = 14 * MICROS_PER_DAY;

/// Half-open interval [start_us, end_us).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeWindow {
    pub index: usize,
    pub start_us: i64,
    pub end_us: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowError {
    EmptyInput,
    NonAdjacentWindows { prev: usize, cur: usize },
    InvalidDuration,
}

impl fmt::Display for WindowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowError::EmptyInput => write!(f, "no records to cut into windows"),
            WindowError::NonAdjacentWindows { prev, cur } => {
                write!(f, "windows {prev} and {cur} are not adjacent")
            }
            WindowError::InvalidDuration => write!(f, "window duration must be positive"),
        }
    }
}

impl core::error::Error for WindowError {}

/// Advisory attached by [`cut_windows`] when the duration is short.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DurationAdvice {
    /// Duration under 7 days: expect unfit windows.
    TooShortToFit,
    /// Duration under 14 days: fits may be unstable.
    ShorterThanRecommended,
}

/// Windows plus their record slices, tiling the capture span.
#[derive(Debug, Clone)]
pub struct WindowCut {
    pub windows: Vec<(TimeWindow, Vec<QueryRecord>)>,
    pub advice: Option<DurationAdvice>,
    /// The last window covers less of its span than the duration.
    pub partial_last: bool,
}

/// Cuts records into consecutive half-open windows anchored at the earliest
/// timestamp. A record exactly on a boundary belongs to the later window.
pub fn cut_windows(records: Vec<QueryRecord>, duration_us: i64) -> Result<WindowCut, WindowError> {
    if duration_us <= 0 {
        return Err(WindowError::InvalidDuration);
    }
    if records.is_empty() {
        return Err(WindowError::EmptyInput);
    }
    let anchor = records.iter().map(|r| r.timestamp_us).min().unwrap();
    let max_ts = records.iter().map(|r| r.timestamp_us).max().unwrap();
    let count = ((max_ts - anchor) / duration_us) as usize + 1;

    let mut windows: Vec<(TimeWindow, Vec<QueryRecord>)> = (0..count)
        .map(|i| {
            let start = anchor + i as i64 * duration_us;
            (
                TimeWindow { index: i, start_us: start, end_us: start + duration_us },
                Vec::new(),
            )
        })
        .collect();
    for rec in records {
        let idx = ((rec.timestamp_us - anchor) / duration_us) as usize;
        windows[idx].1.push(rec);
    }

    let advice = if duration_us < WARN_BELOW_US {
        Some(DurationAdvice::TooShortToFit)
    } else if duration_us < CAUTION_BELOW_US {
        Some(DurationAdvice::ShorterThanRecommended)
    } else {
        None
    };
    let last_start = windows.last().unwrap().0.start_us;
    let partial_last = max_ts + 1 - last_start < duration_us;
    Ok(WindowCut { windows, advice, partial_last })
}

/// Overlapping variant: windows of `duration_us` starting every `stride_us`.
/// With `stride_us == duration_us` this is exactly [`cut_windows`].
pub fn cut_windows_with_stride(
    records: Vec<QueryRecord>,
    duration_us: i64,
    stride_us: i64,
) -> Result<WindowCut, WindowError> {
    if stride_us <= 0 || duration_us <= 0 {
        return Err(WindowError::InvalidDuration);
    }
    if stride_us == duration_us {
        return cut_windows(records, duration_us);
    }
    if records.is_empty() {
        return Err(WindowError::EmptyInput);
    }
    let anchor = records.iter().map(|r| r.timestamp_us).min().unwrap();
    let max_ts = records.iter().map(|r| r.timestamp_us).max().unwrap();
    let count = ((max_ts - anchor) / stride_us) as usize + 1;
    let mut windows: Vec<(TimeWindow, Vec<QueryRecord>)> = (0..count)
        .map(|i| {
            let start = anchor + i as i64 * stride_us;
            (
                TimeWindow { index: i, start_us: start, end_us: start + duration_us },
                Vec::new(),
            )
        })
        .collect();
    for rec in records {
        for (w, slice) in windows.iter_mut() {
            if rec.timestamp_us >= w.start_us && rec.timestamp_us < w.end_us {
                slice.push(rec.clone());
            }
        }
    }
    windows.retain(|(_, slice)| !slice.is_empty());
    for (i, (w, _)) in windows.iter_mut().enumerate() {
        w.index = i;
    }
    let advice = if duration_us < WARN_BELOW_US {
        Some(DurationAdvice::TooShortToFit)
    } else if duration_us < CAUTION_BELOW_US {
        Some(DurationAdvice::ShorterThanRecommended)
    } else {
        None
    };
    Ok(WindowCut { windows, advice, partial_last: false })
}

/// Knobs threaded through the per-window model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub alpha: f64,
    pub mode: BurrMode,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams { alpha: 0.05, mode: BurrMode::UpperOnly }
    }
}

/// Outcome of running the detection model on one window.
#[derive(Debug, Clone)]
pub struct WindowResult {
    pub window: TimeWindow,
    /// Fit of the unique-name histogram, when it converged.
    pub dnss_fit: Option<GaussianFit>,
    /// Fit of the access-weighted histogram, when it converged.
    pub adnss_fit: Option<GaussianFit>,
    /// Burr lengths unioned across both spaces, sorted by descending excess.
    pub burrs: Vec<BurrPoint>,
    /// Burr length → the names (with access counts) at that length.
    pub domains_at: BTreeMap<u32, Vec<(String, u64)>>,
    /// (DNSS capacity, ADNSS capacity).
    pub space_sizes: (u64, u64),
    /// Neither space could be fitted; burrs are empty.
    pub unfit: bool,
    /// Per-space histogram exports: (length, count) with nonzero counts.
    pub dnss_hist: Vec<(u32, u64)>,
    pub adnss_hist: Vec<(u32, u64)>,
    /// Per-space band/burr export rows; empty when that space's fit failed.
    pub dnss_table: Vec<BandRow>,
    pub adnss_table: Vec<BandRow>,
    /// Full DNSS grouped by length; the sudden-burr difference base.
    dnss_names_by_len: BTreeMap<u32, BTreeSet<String>>,
}

impl WindowResult {
    pub fn burr_lengths(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.burrs.iter().map(|b| b.length).collect();
        v.sort_unstable();
        v
    }

    pub fn has_burr_at(&self, length: u32) -> bool {
        self.burrs.iter().any(|b| b.length == length)
    }

    pub fn dnss_names_at(&self, length: u32) -> Option<&BTreeSet<String>> {
        self.dnss_names_by_len.get(&length)
    }

    #[cfg(test)]
    pub(crate) fn synthetic(index: usize, burr_lengths: &[u32]) -> WindowResult {
        WindowResult {
            window: TimeWindow { index, start_us: 0, end_us: 1 },
            dnss_fit: None,
            adnss_fit: None,
            burrs: burr_lengths
                .iter()
                .map(|&l| BurrPoint {
                    length: l,
                    observed: 1,
                    expected: 0.0,
                    upper: 0.0,
                    excess: 1.0,
                })
                .collect(),
            domains_at: BTreeMap::new(),
            space_sizes: (0, 0),
            unfit: false,
            dnss_hist: Vec::new(),
            adnss_hist: Vec::new(),
            dnss_table: Vec::new(),
            adnss_table: Vec::new(),
            dnss_names_by_len: BTreeMap::new(),
        }
    }
}

/// Runs the full detection model on one window's records: builds both sample
/// spaces, fits, delineates, detects burrs on each space and unions the burr
/// lengths (keeping the larger excess where both flag), and collects the
/// affected domains. A window where neither space fits is marked unfit.
pub fn analyze_window(
    window: TimeWindow,
    slice: &[QueryRecord],
    params: &AnalysisParams,
) -> WindowResult {
    let (dnss, adnss) = build_spaces(slice.iter());
    let space_sizes = (dnss.capacity(), adnss.capacity());

    let mut merged: BTreeMap<u32, BurrPoint> = BTreeMap::new();
    let mut fits: [Option<GaussianFit>; 2] = [None, None];
    let mut hists: [Vec<(u32, u64)>; 2] = [Vec::new(), Vec::new()];
    let mut tables: [Vec<BandRow>; 2] = [Vec::new(), Vec::new()];
    for (i, space) in [&dnss, &adnss].into_iter().enumerate() {
        let hist = length_histogram(space);
        hists[i] = hist.iter().collect();
        let Ok(fit) = fit_gaussian(&hist) else {
            continue;
        };
        if let Ok(band) = delineation_band(&hist, &fit, params.alpha) {
            let burrs = detect_burrs(&hist, &band, params.mode);
            tables[i] = band_table(&hist, &band, &burrs);
            for bp in burrs {
                match merged.get(&bp.length) {
                    Some(prev) if prev.excess >= bp.excess => {}
                    _ => {
                        merged.insert(bp.length, bp);
                    }
                }
            }
        }
        fits[i] = Some(fit);
    }
    let [dnss_fit, adnss_fit] = fits;
    let [dnss_hist, adnss_hist] = hists;
    let [dnss_table, adnss_table] = tables;
    let unfit = dnss_fit.is_none() && adnss_fit.is_none();

    let mut burrs: Vec<BurrPoint> = merged.into_values().collect();
    burrs.sort_by(|a, b| {
        b.excess
            .partial_cmp(&a.excess)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.length.cmp(&b.length))
    });

    let mut domains_at = BTreeMap::new();
    for bp in &burrs {
        domains_at.insert(bp.length, burr_domains(&adnss, bp.length));
    }

    let mut dnss_names_by_len: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
    for (name, _) in dnss.entries() {
        dnss_names_by_len
            .entry(name.len() as u32)
            .or_default()
            .insert(String::from(name));
    }

    WindowResult {
        window,
        dnss_fit,
        adnss_fit,
        burrs,
        domains_at,
        space_sizes,
        unfit,
        dnss_hist,
        adnss_hist,
        dnss_table,
        adnss_table,
        dnss_names_by_len,
    }
}

/// Burr-length × window-index presence matrix (the heat-map data).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurrMatrix {
    /// Row labels, ascending.
    pub lengths: Vec<u32>,
    /// cells[row][column] — column j is window index j.
    pub cells: Vec<Vec<u8>>,
}

pub fn burr_matrix(results: &[WindowResult]) -> BurrMatrix {
    let mut lengths: BTreeSet<u32> = BTreeSet::new();
    for r in results {
        lengths.extend(r.burrs.iter().map(|b| b.length));
    }
    let lengths: Vec<u32> = lengths.into_iter().collect();
    let cells = lengths
        .iter()
        .map(|&l| {
            results
                .iter()
                .map(|r| u8::from(r.has_burr_at(l)))
                .collect()
        })
        .collect();
    BurrMatrix { lengths, cells }
}

/// Domains that newly appeared at a burr length between two adjacent windows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuddenBurrEntry {
    pub length: u32,
    pub new_domains: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuddenBurrReport {
    pub from_window: usize,
    pub to_window: usize,
    pub entries: Vec<SuddenBurrEntry>,
}

/// Difference sets between adjacent windows: for a burr length new in `cur`,
/// everything at that length minus any same-length name in `prev`'s full
/// DNSS; for a burr present in both, the domain-set difference. Lengths with
/// empty differences are omitted, so recurring hot domains never surface.
pub fn sudden_burrs(
    prev: &WindowResult,
    cur: &WindowResult,
) -> Result<SuddenBurrReport, WindowError> {
    if cur.window.index != prev.window.index + 1 {
        return Err(WindowError::NonAdjacentWindows {
            prev: prev.window.index,
            cur: cur.window.index,
        });
    }
    let empty_names = BTreeSet::new();
    let mut entries = Vec::new();
    for (&length, domains) in &cur.domains_at {
        let baseline: BTreeSet<&str> = if prev.has_burr_at(length) {
            prev.domains_at
                .get(&length)
                .map(|d| d.iter().map(|(n, _)| n.as_str()).collect())
                .unwrap_or_default()
        } else {
            prev.dnss_names_by_len
                .get(&length)
                .unwrap_or(&empty_names)
                .iter()
                .map(|s| s.as_str())
                .collect()
        };
        let new_domains: Vec<(String, u64)> = domains
            .iter()
            .filter(|(name, _)| !baseline.contains(name.as_str()))
            .cloned()
            .collect();
        if !new_domains.is_empty() {
            entries.push(SuddenBurrEntry { length, new_domains });
        }
    }
    Ok(SuddenBurrReport {
        from_window: prev.window.index,
        to_window: cur.window.index,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec_at(ts: i64, name: &str) -> QueryRecord {
        QueryRecord::new(ts, name, 1, None)
    }

    #[test]
    fn ninety_days_three_windows() {
        let day = MICROS_PER_DAY;
        let mut records = Vec::new();
        for d in 0..90 {
            records.push(rec_at(d * day, "example.com"));
        }
        let cut = cut_windows(records, 30 * day).unwrap();
        assert_eq!(cut.windows.len(), 3);
        let total: usize = cut.windows.iter().map(|(_, s)| s.len()).sum();
        assert_eq!(total, 90);
        assert!(cut.advice.is_none());
        for (w, slice) in &cut.windows {
            assert_eq!(w.end_us - w.start_us, 30 * day);
            assert_eq!(slice.len(), 30);
        }
    }

    #[test]
    fn boundary_record_goes_to_later_window() {
        let records = vec![rec_at(0, "a.com"), rec_at(1000, "b.com")];
        let cut = cut_windows(records, 1000).unwrap();
        assert_eq!(cut.windows.len(), 2);
        assert_eq!(cut.windows[0].1.len(), 1);
        assert_eq!(cut.windows[1].1.len(), 1);
        assert_eq!(cut.windows[1].0.start_us, 1000);
    }

    #[test]
    fn short_capture_is_partial() {
        let day = MICROS_PER_DAY;
        let records = vec![rec_at(0, "a.com"), rec_at(3 * day - 1, "b.com")];
        let cut = cut_windows(records, 30 * day).unwrap();
        assert_eq!(cut.windows.len(), 1);
        assert!(cut.partial_last);
    }

    #[test]
    fn advice_levels() {
        let day = MICROS_PER_DAY;
        let recs = || vec![rec_at(0, "a.com"), rec_at(day, "b.com")];
        assert_eq!(
            cut_windows(recs(), 5 * day).unwrap().advice,
            Some(DurationAdvice::TooShortToFit)
        );
        assert_eq!(
            cut_windows(recs(), 10 * day).unwrap().advice,
            Some(DurationAdvice::ShorterThanRecommended)
        );
        assert_eq!(cut_windows(recs(), 30 * day).unwrap().advice, None);
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(cut_windows(Vec::new(), 1000).err(), Some(WindowError::EmptyInput));
    }

    #[test]
    fn stride_overlap_covers_records_twice() {
        let records: Vec<QueryRecord> = (0..100).map(|i| rec_at(i * 10, "a.com")).collect();
        let cut = cut_windows_with_stride(records, 500, 250).unwrap();
        let total: usize = cut.windows.iter().map(|(_, s)| s.len()).sum();
        assert!(total > 100, "overlapping windows duplicate interior records");
    }

    #[test]
    fn too_few_lengths_is_unfit() {
        let records = vec![
            rec_at(0, "aa.com"),
            rec_at(1, "bbb.com"),
            rec_at(2, "c.com"),
        ];
        let w = TimeWindow { index: 0, start_us: 0, end_us: 10 };
        let res = analyze_window(w, &records, &AnalysisParams::default());
        assert!(res.unfit);
        assert!(res.burrs.is_empty());
    }

    #[test]
    fn matrix_rows_and_columns() {
        let results = vec![
            WindowResult::synthetic(0, &[30]),
            WindowResult::synthetic(1, &[30, 67]),
            WindowResult::synthetic(2, &[30]),
        ];
        let m = burr_matrix(&results);
        assert_eq!(m.lengths, vec![30, 67]);
        assert_eq!(m.cells[0], vec![1, 1, 1]);
        assert_eq!(m.cells[1], vec![0, 1, 0]);

        // column j depends only on results[j]
        let solo = burr_matrix(&results[1..2]);
        assert_eq!(solo.cells[0], vec![1]);
        assert_eq!(solo.cells[1], vec![1]);
    }

    #[test]
    fn empty_matrix_without_burrs() {
        let results = vec![WindowResult::synthetic(0, &[]), WindowResult::synthetic(1, &[])];
        let m = burr_matrix(&results);
        assert!(m.lengths.is_empty());
        assert!(m.cells.is_empty());
    }

    #[test]
    fn sudden_burr_difference_sets() {
        let mut prev = WindowResult::synthetic(0, &[30]);
        prev.domains_at
            .insert(30, vec![(String::from("r.arpa"), 500)]);
        let mut cur = WindowResult::synthetic(1, &[30, 67]);
        cur.domains_at
            .insert(30, vec![(String::from("r.arpa"), 480)]);
        cur.domains_at
            .insert(67, vec![(String::from("t1.b.tunnel.com"), 300)]);

        let rep = sudden_burrs(&prev, &cur).unwrap();
        assert_eq!(rep.entries.len(), 1);
        assert_eq!(rep.entries[0].length, 67);
        assert_eq!(rep.entries[0].new_domains[0].0, "t1.b.tunnel.com");
    }

    #[test]
    fn identical_domains_yield_empty_report() {
        let mut prev = WindowResult::synthetic(0, &[22]);
        prev.domains_at.insert(22, vec![(String::from("hot.example.com"), 9)]);
        let mut cur = WindowResult::synthetic(1, &[22]);
        cur.domains_at.insert(22, vec![(String::from("hot.example.com"), 11)]);
        let rep = sudden_burrs(&prev, &cur).unwrap();
        assert!(rep.entries.is_empty(), "same names differ only in counts");
    }

    #[test]
    fn new_burr_subtracts_prev_full_dnss() {
        // the length was not a burr before, but one of its names existed in
        // the previous window's DNSS: only the truly new name surfaces
        let mut prev = WindowResult::synthetic(0, &[]);
        prev.dnss_names_by_len
            .entry(15)
            .or_default()
            .insert(String::from("steady.site.com"));
        let mut cur = WindowResult::synthetic(1, &[15]);
        cur.domains_at.insert(
            15,
            vec![
                (String::from("steady.site.com"), 40),
                (String::from("newcomer.ex.org"), 90),
            ],
        );
        let rep = sudden_burrs(&prev, &cur).unwrap();
        assert_eq!(rep.entries.len(), 1);
        assert_eq!(rep.entries[0].new_domains.len(), 1);
        assert_eq!(rep.entries[0].new_domains[0].0, "newcomer.ex.org");
    }

    #[test]
    fn self_comparison_has_no_entries() {
        let mut w = WindowResult::synthetic(0, &[30]);
        w.domains_at.insert(30, vec![(String::from("a.b.com"), 3)]);
        let mut w2 = w.clone();
        w2.window.index = 1;
        let rep = sudden_burrs(&w, &w2).unwrap();
        assert!(rep.entries.is_empty());
    }

    #[test]
    fn non_adjacent_rejected() {
        let a = WindowResult::synthetic(0, &[]);
        let c = WindowResult::synthetic(2, &[]);
        assert_eq!(
            sudden_burrs(&a, &c).err(),
            Some(WindowError::NonAdjacentWindows { prev: 0, cur: 2 })
        );
    }
}
