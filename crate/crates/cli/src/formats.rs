//! On-disk formats: the query-log CSV, the labels sidecar, whitelist files,
//! threshold files, and the synthesis spec.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use burrscan_core::{normalize_qname, BenignModel, QueryRecord, Thresholds, TunnelModel, Whitelist};
use serde::Deserialize;

/// Default cap on collected row errors before the read aborts.
pub const ROW_ERROR_CAP: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("{path}: missing or misnamed column '{column}' (expected header ts_us,src,qname,qtype)")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}: no header row")]
    NoHeader { path: String },
    #[error("{path}: {count} malformed rows (cap {cap}); first: line {first_line}: {first_msg}")]
    TooManyBadRows {
        path: String,
        count: usize,
        cap: usize,
        first_line: u64,
        first_msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A malformed row that was skipped, with its 1-based line number.
#[derive(Debug, Clone)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Reads the query-log CSV (`ts_us,src,qname,qtype`; src may be empty).
/// Names are normalized on read. Malformed rows are collected, not fatal,
/// up to `cap`.
pub fn read_query_log(
    path: &Path,
    cap: usize,
) -> Result<(Vec<QueryRecord>, Vec<RowError>), SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let path_str = path.display().to_string();
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(SchemaError::NoHeader { path: path_str });
    }
    for (idx, want) in ["ts_us", "src", "qname", "qtype"].iter().enumerate() {
        match headers.get(idx) {
            Some(h) if h.trim() == *want => {}
            _ => {
                return Err(SchemaError::MissingColumn { path: path_str, column: want });
            }
        }
    }

    let mut records = Vec::new();
    let mut errors: Vec<RowError> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        if errors.len() > cap {
            let first = &errors[0];
            return Err(SchemaError::TooManyBadRows {
                path: path_str,
                count: errors.len(),
                cap,
                first_line: first.line,
                first_msg: first.message.clone(),
            });
        }
        let line = i as u64 + 2; // header is line 1
        let bad = |message: String, errors: &mut Vec<RowError>| {
            errors.push(RowError { line, message });
        };
        match row {
            Ok(row) => {
                let ts = row.get(0).map(str::trim).unwrap_or("");
                let src = row.get(1).map(str::trim).unwrap_or("");
                let qname = row.get(2).map(str::trim).unwrap_or("");
                let qtype = row.get(3).map(str::trim).unwrap_or("");
                let ts: i64 = match ts.parse() {
                    Ok(v) if v >= 0 => v,
                    _ => {
                        bad(format!("bad ts_us '{ts}'"), &mut errors);
                        continue;
                    }
                };
                let qtype: u16 = match qtype.parse() {
                    Ok(v) => v,
                    Err(_) => {
                        bad(format!("bad qtype '{qtype}'"), &mut errors);
                        continue;
                    }
                };
                if qname.is_empty() {
                    bad("empty qname".to_string(), &mut errors);
                    continue;
                }
                let src = if src.is_empty() { None } else { Some(src.to_string()) };
                records.push(QueryRecord::new(ts, qname, qtype, src));
            }
            Err(e) => bad(e.to_string(), &mut errors),
        }
    }
    if errors.len() > cap {
        let first = &errors[0];
        return Err(SchemaError::TooManyBadRows {
            path: path_str,
            count: errors.len(),
            cap,
            first_line: first.line,
            first_msg: first.message.clone(),
        });
    }
    Ok((records, errors))
}

/// Writes the query-log CSV. `write_query_log` then [`read_query_log`] is
/// the identity on normalized records.
pub fn write_query_log(records: &[QueryRecord], path: &Path) -> Result<(), SchemaError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ts_us", "src", "qname", "qtype"])?;
    for r in records {
        w.write_record([
            r.timestamp_us.to_string().as_str(),
            r.src.as_deref().unwrap_or(""),
            &r.qname,
            r.qtype.to_string().as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the labels sidecar (`qname,label`), one row per distinct name.
pub fn write_labels(labels: &[(String, &str)], path: &Path) -> Result<(), SchemaError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["qname", "label"])?;
    for (name, label) in labels {
        w.write_record([name.as_str(), label])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the labels sidecar into (qname → is_tunnel).
pub fn read_labels(path: &Path) -> anyhow::Result<std::collections::BTreeMap<String, bool>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut out = std::collections::BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let name = normalize_qname(row.get(0).unwrap_or("").trim());
        let label = row.get(1).unwrap_or("").trim();
        match label {
            "benign" => out.insert(name, false),
            "tunnel" => out.insert(name, true),
            other => anyhow::bail!("unknown label '{other}' for {name}"),
        };
    }
    Ok(out)
}

/// Loads a whitelist file: one suffix per line, '#' comments.
pub fn load_whitelist(path: &Path) -> anyhow::Result<Whitelist> {
    let file = fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open whitelist {}: {e}", path.display()))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line?);
    }
    Ok(Whitelist::from_lines(
        lines.iter().map(String::as_str),
        &path.display().to_string(),
    ))
}

// The thresholds file nests the fan-out rule:
// {"len_rule":52,"entropy_rule":3.5,"nonalpha_rule":0.35,
//  "fanout_rule":{"subdomains":10,"queries":100}}
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ThresholdsFile {
    len_rule: u32,
    entropy_rule: f64,
    nonalpha_rule: f64,
    fanout_rule: FanoutRule,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FanoutRule {
    subdomains: u32,
    queries: u64,
}

impl Default for ThresholdsFile {
    fn default() -> Self {
        let t = Thresholds::default();
        ThresholdsFile {
            len_rule: t.len_rule,
            entropy_rule: t.entropy_rule,
            nonalpha_rule: t.nonalpha_rule,
            fanout_rule: FanoutRule::default(),
        }
    }
}

impl Default for FanoutRule {
    fn default() -> Self {
        let t = Thresholds::default();
        FanoutRule { subdomains: t.fanout_subdomains, queries: t.fanout_queries }
    }
}

/// Loads the thresholds JSON; absent fields keep their defaults.
pub fn load_thresholds(path: &Path) -> anyhow::Result<Thresholds> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot open thresholds {}: {e}", path.display()))?;
    let file: ThresholdsFile = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("bad thresholds file {}: {e}", path.display()))?;
    Ok(Thresholds {
        len_rule: file.len_rule,
        entropy_rule: file.entropy_rule,
        nonalpha_rule: file.nonalpha_rule,
        fanout_subdomains: file.fanout_rule.subdomains,
        fanout_queries: file.fanout_rule.queries,
    })
}

/// The synthesis spec: a benign model plus zero or more tunnel bursts.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub benign: BenignModel,
    pub tunnels: Vec<TunnelModel>,
}

pub fn load_synth_spec(path: &Path) -> anyhow::Result<SynthSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot open synthesis spec {}: {e}", path.display()))?;
    let spec: SynthSpec = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("bad synthesis spec {}: {e}", path.display()))?;
    Ok(spec)
}

/// Writes text, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())
}
