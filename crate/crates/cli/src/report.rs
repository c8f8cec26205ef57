//! Machine-readable run artifacts: the JSON report, per-window histogram and
//! band CSVs, the heat-map CSV, and the sudden-burr JSON.

use std::fmt::Write as _;
use std::path::Path;

use burrscan_core::{
    BurrMatrix, Classification, GaussianFit, IngestStats, SuddenBurrReport, Verdict, WindowResult,
};
use serde::Serialize;

use crate::formats::write_text;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ConfigEcho,
    pub ingest: IngestStats,
    pub warnings: Vec<String>,
    pub windows: Vec<WindowSummary>,
    pub sudden_burrs: Vec<SuddenEntryJson>,
    pub verdicts: Vec<VerdictJson>,
}

#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub inputs: Vec<String>,
    pub window_days: f64,
    pub stride_days: Option<f64>,
    pub alpha: f64,
    pub mode: String,
    pub whitelist: Option<String>,
    pub thresholds: Option<String>,
    pub port: u16,
}

#[derive(Debug, Serialize)]
pub struct WindowSummary {
    pub index: usize,
    pub start_us: i64,
    pub end_us: i64,
    pub records: u64,
    pub unfit: bool,
    pub dnss_n: u64,
    pub adnss_n: u64,
    pub dnss_fit: Option<GaussianFit>,
    pub adnss_fit: Option<GaussianFit>,
    pub burr_lengths: Vec<u32>,
}

/// One flattened sudden-burr entry, as documented:
/// `[{from,to,length,new_domains:[{qname,count}]}]`.
#[derive(Debug, Serialize)]
pub struct SuddenEntryJson {
    pub from: usize,
    pub to: usize,
    pub length: u32,
    pub new_domains: Vec<DomainCount>,
}

#[derive(Debug, Serialize)]
pub struct DomainCount {
    pub qname: String,
    pub count: u64,
}

#[derive(Debug, Serialize)]
pub struct VerdictJson {
    pub family: String,
    pub classification: String,
    pub reasons: Vec<String>,
    pub members: Vec<DomainCount>,
}

pub fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Benign => "benign",
        Classification::Suspicious => "suspicious",
        Classification::Tunnel => "tunnel",
    }
}

pub fn flatten_sudden(reports: &[SuddenBurrReport]) -> Vec<SuddenEntryJson> {
    let mut out = Vec::new();
    for rep in reports {
        for entry in &rep.entries {
            out.push(SuddenEntryJson {
                from: rep.from_window,
                to: rep.to_window,
                length: entry.length,
                new_domains: entry
                    .new_domains
                    .iter()
                    .map(|(qname, count)| DomainCount { qname: qname.clone(), count: *count })
                    .collect(),
            });
        }
    }
    out
}

pub fn verdict_json(verdict: &Verdict, members: &[(String, u64)]) -> VerdictJson {
    VerdictJson {
        family: verdict.family.clone(),
        classification: classification_name(verdict.classification).to_string(),
        reasons: verdict.reasons.clone(),
        members: members
            .iter()
            .map(|(qname, count)| DomainCount { qname: qname.clone(), count: *count })
            .collect(),
    }
}

// ── CSV writers ─────────────────────────────────────────────────────

/// `length,count` rows, the plot-data format for the histograms.
pub fn histogram_csv(hist: &[(u32, u64)]) -> String {
    let mut s = String::from("length,count\n");
    for (length, count) in hist {
        let _ = writeln!(s, "{length},{count}");
    }
    s
}

/// `length,observed,expected,lower,upper,is_burr` rows.
pub fn band_csv(rows: &[burrscan_core::BandRow]) -> String {
    let mut s = String::from("length,observed,expected,lower,upper,is_burr\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.4},{:.4},{:.4},{}",
            r.length,
            r.observed,
            r.expected,
            r.lower,
            r.upper,
            u8::from(r.is_burr)
        );
    }
    s
}

/// First column `burr_length`, one 0/1 column per window index.
pub fn heatmap_csv(matrix: &BurrMatrix, window_count: usize) -> String {
    let mut s = String::from("burr_length");
    for i in 0..window_count {
        let _ = write!(s, ",window_{i}");
    }
    s.push('\n');
    for (row, length) in matrix.lengths.iter().enumerate() {
        let _ = write!(s, "{length}");
        for cell in &matrix.cells[row] {
            let _ = write!(s, ",{cell}");
        }
        s.push('\n');
    }
    s
}

pub fn verdicts_csv(verdicts: &[VerdictJson]) -> String {
    let mut s = String::from("family,classification,distinct_names,total_queries,reasons\n");
    for v in verdicts {
        let total: u64 = v.members.iter().map(|m| m.count).sum();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            v.family,
            v.classification,
            v.members.len(),
            total,
            v.reasons.join("; ")
        );
    }
    s
}

/// Writes every per-window artifact plus the heat map and the sudden-burr
/// JSON into `out`.
pub fn write_artifacts(
    out: &Path,
    results: &[WindowResult],
    matrix: &BurrMatrix,
    sudden: &[SuddenEntryJson],
    report: &RunReport,
) -> anyhow::Result<()> {
    for r in results {
        let i = r.window.index;
        write_text(&out.join(format!("window_{i}_dnss_hist.csv")), &histogram_csv(&r.dnss_hist))?;
        write_text(&out.join(format!("window_{i}_adnss_hist.csv")), &histogram_csv(&r.adnss_hist))?;
        write_text(&out.join(format!("window_{i}_dnss_band.csv")), &band_csv(&r.dnss_table))?;
        write_text(&out.join(format!("window_{i}_adnss_band.csv")), &band_csv(&r.adnss_table))?;
    }
    write_text(&out.join("heatmap.csv"), &heatmap_csv(matrix, results.len()))?;
    write_text(&out.join("sudden_burrs.json"), &serde_json::to_string_pretty(sudden)?)?;
    write_text(&out.join("verdicts.csv"), &verdicts_csv(&report.verdicts))?;
    write_text(&out.join("report.json"), &serde_json::to_string_pretty(report)?)?;
    Ok(())
}
