//! The three commands: analyze (full pipeline), synth (dataset generation),
//! and eval (metrics against a labeled dataset).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use burrscan_core::{
    analyze_window, build_evidence, burr_matrix, classify, confusion_metrics, cut_windows,
    cut_windows_with_stride, generate_benign, inject_tunnel, normalize_qname, sudden_burrs,
    AnalysisParams, BurrMode, CaptureParser, Classification, ConfusionCounts, IngestStats,
    Metrics, QueryRecord, SuddenBurrReport, Thresholds, Whitelist, WindowResult,
    window::{DurationAdvice, MICROS_PER_DAY},
};

use crate::formats::{
    self, load_synth_spec, load_thresholds, load_whitelist, read_labels, read_query_log,
    write_labels, write_query_log, ROW_ERROR_CAP,
};
use crate::report::{
    flatten_sudden, verdict_json, write_artifacts, ConfigEcho, RunReport,
    WindowSummary,
};

pub const WARN_SHORT_WINDOW: &str =
    "warning: window duration under 7 days is usually too short for a stable length-distribution fit";
pub const CAUTION_SHORT_WINDOW: &str =
    "caution: window duration under 14 days can fit poorly; 30 days is the default recommendation";

#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub inputs: Vec<PathBuf>,
    pub window_days: f64,
    pub stride_days: Option<f64>,
    pub alpha: f64,
    pub mode: BurrMode,
    pub whitelist: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub out: PathBuf,
    pub port: u16,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            inputs: Vec::new(),
            window_days: 30.0,
            stride_days: None,
            alpha: 0.05,
            mode: BurrMode::UpperOnly,
            whitelist: None,
            thresholds: None,
            out: PathBuf::from("burrscan-out"),
            port: 53,
        }
    }
}

pub struct AnalyzeOutcome {
    pub report: RunReport,
    pub tunnel_families: Vec<String>,
}

fn looks_like_pcap(bytes: &[u8]) -> bool {
    if bytes.len() < 4 {
        return false;
    }
    let magic = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    matches!(magic, 0xa1b2c3d4 | 0xd4c3b2a1 | 0xa1b23c4d | 0x4d3cb2a1)
}

fn ingest(inputs: &[PathBuf], port: u16) -> anyhow::Result<(Vec<QueryRecord>, IngestStats)> {
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    for path in inputs {
        let bytes = fs::read(path).with_context(|| format!("cannot read input {}", path.display()))?;
        if looks_like_pcap(&bytes) {
            let parser = CaptureParser::with_port_filter(&bytes, port)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            let (mut recs, s) = parser.collect_records();
            log::info!(
                "{}: {} packets, {} DNS messages, {} queries, {} malformed",
                path.display(),
                s.packets_seen,
                s.dns_messages,
                s.queries_emitted,
                s.malformed_skipped
            );
            stats.packets_seen += s.packets_seen;
            stats.dns_messages += s.dns_messages;
            stats.queries_emitted += s.queries_emitted;
            stats.malformed_skipped += s.malformed_skipped;
            records.append(&mut recs);
        } else {
            let (mut recs, row_errors) = read_query_log(path, ROW_ERROR_CAP)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            for e in &row_errors {
                log::warn!("{}: line {}: {}", path.display(), e.line, e.message);
            }
            stats.dns_messages += recs.len() as u64 + row_errors.len() as u64;
            stats.queries_emitted += recs.len() as u64;
            stats.malformed_skipped += row_errors.len() as u64;
            records.append(&mut recs);
        }
    }
    records.sort_by(|a, b| a.timestamp_us.cmp(&b.timestamp_us).then_with(|| a.qname.cmp(&b.qname)));
    Ok((records, stats))
}

/// Runs ingest → windows → per-window model → heat map → sudden burrs →
/// verification, then writes every artifact under `config.out`. Nothing is
/// written until the configuration fully validates.
pub fn cmd_analyze(config: &AnalyzeConfig) -> anyhow::Result<AnalyzeOutcome> {
    if config.inputs.is_empty() {
        bail!("at least one --input is required");
    }
    if config.window_days <= 0.0 {
        bail!("--window-days must be positive");
    }
    burrscan_core::fit::ks_critical_value(100, config.alpha)
        .map_err(|e| anyhow::anyhow!("--alpha: {e}"))?;
    let whitelist = match &config.whitelist {
        Some(path) => load_whitelist(path)?,
        None => Whitelist::empty(),
    };
    let thresholds = match &config.thresholds {
        Some(path) => load_thresholds(path)?,
        None => Thresholds::default(),
    };

    let (records, stats) = ingest(&config.inputs, config.port)?;
    if records.is_empty() {
        bail!("no DNS query records in the inputs");
    }

    let duration_us = (config.window_days * MICROS_PER_DAY as f64) as i64;
    let cut = match config.stride_days {
        Some(days) => cut_windows_with_stride(
            records,
            duration_us,
            (days * MICROS_PER_DAY as f64) as i64,
        )?,
        None => cut_windows(records, duration_us)?,
    };

    let mut warnings = Vec::new();
    match cut.advice {
        Some(DurationAdvice::TooShortToFit) => warnings.push(WARN_SHORT_WINDOW.to_string()),
        Some(DurationAdvice::ShorterThanRecommended) => {
            warnings.push(CAUTION_SHORT_WINDOW.to_string())
        }
        None => {}
    }
    if cut.partial_last {
        warnings.push("note: the capture span does not fill the last window".to_string());
    }
    for w in &warnings {
        eprintln!("{w}");
    }

    let params = AnalysisParams { alpha: config.alpha, mode: config.mode };
    let results: Vec<WindowResult> = cut
        .windows
        .iter()
        .map(|(w, slice)| analyze_window(*w, slice, &params))
        .collect();
    for r in &results {
        if r.unfit {
            log::warn!("window {} could not be fitted (too little data?)", r.window.index);
        }
    }

    let matrix = burr_matrix(&results);
    let mut sudden_reports: Vec<SuddenBurrReport> = Vec::new();
    for pair in results.windows(2) {
        sudden_reports.push(sudden_burrs(&pair[0], &pair[1])?);
    }

    // verification over the union of every sudden-burr difference set
    let mut candidates: BTreeMap<String, u64> = BTreeMap::new();
    for rep in &sudden_reports {
        for entry in &rep.entries {
            for (name, count) in &entry.new_domains {
                let slot = candidates.entry(name.clone()).or_insert(0);
                *slot = (*slot).max(*count);
            }
        }
    }
    let candidate_list: Vec<(String, u64)> =
        candidates.into_iter().collect();
    let evidence = build_evidence(&candidate_list);
    let mut verdicts = Vec::new();
    let mut tunnel_families = Vec::new();
    for ev in &evidence {
        let v = classify(ev, &whitelist, &thresholds);
        if v.classification == Classification::Tunnel {
            tunnel_families.push(v.family.clone());
        }
        verdicts.push(verdict_json(&v, &ev.members));
    }

    let windows: Vec<WindowSummary> = results
        .iter()
        .zip(&cut.windows)
        .map(|(r, (_, slice))| WindowSummary {
            index: r.window.index,
            start_us: r.window.start_us,
            end_us: r.window.end_us,
            records: slice.len() as u64,
            unfit: r.unfit,
            dnss_n: r.space_sizes.0,
            adnss_n: r.space_sizes.1,
            dnss_fit: r.dnss_fit.clone(),
            adnss_fit: r.adnss_fit.clone(),
            burr_lengths: r.burr_lengths(),
        })
        .collect();

    let sudden_flat = flatten_sudden(&sudden_reports);
    let report = RunReport {
        tool: "burrscan",
        version: env!("CARGO_PKG_VERSION"),
        config: ConfigEcho {
            inputs: config.inputs.iter().map(|p| p.display().to_string()).collect(),
            window_days: config.window_days,
            stride_days: config.stride_days,
            alpha: config.alpha,
            mode: match config.mode {
                BurrMode::UpperOnly => "upper".to_string(),
                BurrMode::TwoSided => "two-sided".to_string(),
            },
            whitelist: config.whitelist.as_ref().map(|p| p.display().to_string()),
            thresholds: config.thresholds.as_ref().map(|p| p.display().to_string()),
            port: config.port,
        },
        ingest: stats,
        warnings,
        windows,
        sudden_burrs: sudden_flat,
        verdicts,
    };

    write_artifacts(&config.out, &results, &matrix, &report.sudden_burrs, &report)?;
    for family in &tunnel_families {
        log::warn!("tunnel verdict: {family}");
    }
    Ok(AnalyzeOutcome { report, tunnel_families })
}

/// Generates the labeled dataset a synthesis spec describes: `queries.csv`
/// plus the `labels.csv` sidecar.
pub fn cmd_synth(spec_path: &Path, out: &Path) -> anyhow::Result<(usize, usize)> {
    let spec = load_synth_spec(spec_path)?;
    let mut records = generate_benign(&spec.benign).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut tunnel_suffixes: Vec<String> = Vec::new();
    for tunnel in &spec.tunnels {
        records = inject_tunnel(records, tunnel).map_err(|e| anyhow::anyhow!("{e}"))?;
        tunnel_suffixes.push(normalize_qname(&tunnel.suffix));
    }

    let mut names: BTreeSet<&str> = BTreeSet::new();
    for r in &records {
        names.insert(&r.qname);
    }
    let is_tunnel = |name: &str| {
        tunnel_suffixes
            .iter()
            .any(|s| name == s || name.ends_with(&format!(".{s}")))
    };
    let labels: Vec<(String, &str)> = names
        .iter()
        .map(|n| (n.to_string(), if is_tunnel(n) { "tunnel" } else { "benign" }))
        .collect();

    fs::create_dir_all(out)?;
    write_query_log(&records, &out.join("queries.csv")).map_err(|e| anyhow::anyhow!("{e}"))?;
    write_labels(&labels, &out.join("labels.csv"))?;
    let tunnels = labels.iter().filter(|(_, l)| *l == "tunnel").count();
    Ok((records.len(), tunnels))
}

pub struct EvalOutcome {
    /// Paper polarity: normal traffic is the positive class.
    pub normal_positive: (ConfusionCounts, Metrics),
    /// Detection polarity: tunnel traffic is the positive class.
    pub tunnel_positive: (ConfusionCounts, Metrics),
    pub table: String,
}

fn fmt_metric(m: Option<f64>) -> String {
    match m {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

/// Scores a run report against a labels file. Every name the report lists
/// in a sudden-burr entry must be labeled.
pub fn cmd_eval(report_dir: &Path, labels_path: &Path) -> anyhow::Result<EvalOutcome> {
    let report_path = report_dir.join("report.json");
    let text = fs::read_to_string(&report_path)
        .with_context(|| format!("cannot read {}", report_path.display()))?;
    let report: serde_json::Value = serde_json::from_str(&text)?;
    let labels = read_labels(labels_path)?;

    let mut reported: BTreeSet<String> = BTreeSet::new();
    for entry in report["sudden_burrs"].as_array().into_iter().flatten() {
        for d in entry["new_domains"].as_array().into_iter().flatten() {
            if let Some(q) = d["qname"].as_str() {
                reported.insert(q.to_string());
            }
        }
    }
    let unlabeled: Vec<&String> = reported.iter().filter(|n| !labels.contains_key(*n)).collect();
    if !unlabeled.is_empty() {
        let shown: Vec<&str> = unlabeled.iter().take(20).map(|s| s.as_str()).collect();
        bail!(
            "{} reported names missing from the labels file, e.g.: {}",
            unlabeled.len(),
            shown.join(", ")
        );
    }

    let mut detected: BTreeSet<String> = BTreeSet::new();
    for v in report["verdicts"].as_array().into_iter().flatten() {
        if v["classification"].as_str() == Some("tunnel") {
            for m in v["members"].as_array().into_iter().flatten() {
                if let Some(q) = m["qname"].as_str() {
                    detected.insert(q.to_string());
                }
            }
        }
    }

    // paper polarity: TP = normal kept normal, TN = tunnel called tunnel
    let mut normal = ConfusionCounts::default();
    for (name, is_tunnel) in &labels {
        let called_tunnel = detected.contains(name);
        match (is_tunnel, called_tunnel) {
            (false, false) => normal.true_pos += 1,
            (false, true) => normal.false_neg += 1,
            (true, false) => normal.false_pos += 1,
            (true, true) => normal.true_neg += 1,
        }
    }
    let tunnel = normal.inverted();
    let nm = confusion_metrics(&normal);
    let tm = confusion_metrics(&tunnel);

    let mut table = String::new();
    table.push_str("polarity         tp      fn      fp      tn  accuracy precision  recall      f1\n");
    for (name, c, m) in [("normal-positive", normal, nm), ("tunnel-positive", tunnel, tm)] {
        table.push_str(&format!(
            "{name:<15} {:>6} {:>7} {:>7} {:>7} {:>9} {:>9} {:>7} {:>7}\n",
            c.true_pos,
            c.false_neg,
            c.false_pos,
            c.true_neg,
            fmt_metric(m.accuracy),
            fmt_metric(m.precision),
            fmt_metric(m.recall),
            fmt_metric(m.f1),
        ));
    }

    let mut csv = String::from("polarity,tp,fn,fp,tn,accuracy,precision,recall,f1\n");
    for (name, c, m) in [("normal_positive", normal, nm), ("tunnel_positive", tunnel, tm)] {
        csv.push_str(&format!(
            "{name},{},{},{},{},{},{},{},{}\n",
            c.true_pos,
            c.false_neg,
            c.false_pos,
            c.true_neg,
            fmt_metric(m.accuracy),
            fmt_metric(m.precision),
            fmt_metric(m.recall),
            fmt_metric(m.f1),
        ));
    }
    formats::write_text(&report_dir.join("metrics.csv"), &csv)?;

    Ok(EvalOutcome {
        normal_positive: (normal, nm),
        tunnel_positive: (tunnel, tm),
        table,
    })
}
