//! Multidimensional verification of sudden-burr domains: whitelist filtering
//! plus payload and traffic heuristics, producing a verdict per domain family.
//!
//! Tunnel payloads confuse the query characters and arrive in sudden volume;
//! the rules mirror that: a family is called a tunnel only when a payload
//! signal (entropy or non-alphabetic density) coincides with a scale signal
//! (name length or family fan-out). One signal group alone is merely
//! suspicious. Sandbox replay is deliberately not implemented here; the
//! [`Verifier`] trait is the plug-in point for external tooling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Second-level labels that act as public registries under a country TLD
/// ("co.uk", "com.au", ...). Deliberately small; the whitelist handles the
/// long tail.
const PUBLIC_SECOND_LEVELS: &[&str] = &["co", "com", "net", "org", "ac", "gov", "edu", "mil"];

/// The registered domain a name belongs to: its last two labels, or three
/// when the second-to-last label is a public registry under a two-letter TLD.
pub fn registered_suffix(qname: &str) -> String {
    let labels: Vec<&str> = qname.split('.').collect();
    if labels.len() <= 2 {
        return String::from(qname);
    }
    let tld = labels[labels.len() - 1];
    let second = labels[labels.len() - 2];
    let take = if tld.len() == 2 && PUBLIC_SECOND_LEVELS.contains(&second) && labels.len() >= 3 {
        3
    } else {
        2
    };
    labels[labels.len() - take..].join(".")
}

/// Registered-domain suffixes considered benign regardless of statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Whitelist {
    suffixes: BTreeSet<String>,
    pub source: String,
}

impl Whitelist {
    pub fn empty() -> Self {
        Whitelist::default()
    }

    /// One suffix per line; '#' starts a comment. Entries are normalized to
    /// lowercase without leading or trailing dots.
    pub fn from_lines<'a, I: IntoIterator<Item = &'a str>>(lines: I, source: &str) -> Self {
        let mut suffixes = BTreeSet::new();
        for line in lines {
            let entry = line.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            let entry = entry.trim_matches('.').to_ascii_lowercase();
            if !entry.is_empty() {
                suffixes.insert(entry);
            }
        }
        Whitelist { suffixes, source: String::from(source) }
    }

    pub fn contains(&self, suffix: &str) -> bool {
        self.suffixes.contains(suffix)
    }

    pub fn len(&self) -> usize {
        self.suffixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suffixes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyLabel;

impl fmt::Display for EmptyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entropy of an empty label")
    }
}

impl core::error::Error for EmptyLabel {}

/// Shannon entropy in bits per character over the character frequencies of
/// `text`, dots excluded.
pub fn shannon_entropy(text: &str) -> Result<f64, EmptyLabel> {
    let mut freq: BTreeMap<char, u32> = BTreeMap::new();
    let mut total = 0u32;
    for c in text.chars().filter(|&c| c != '.') {
        *freq.entry(c).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(EmptyLabel);
    }
    let n = total as f64;
    let mut h = 0.0;
    for &count in freq.values() {
        let p = count as f64 / n;
        h -= p * libm::log2(p);
    }
    Ok(h)
}

/// Aggregated features of one registered-domain family.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainEvidence {
    /// The registered suffix the family is keyed on.
    pub family: String,
    /// Total queries across members.
    pub access_count: u64,
    /// Max entropy over the members' subdomain parts, bits per character.
    pub entropy_bits_per_char: f64,
    /// Max fraction of non-alphabetic characters in a member's subdomain part.
    pub nonalpha_ratio: f64,
    /// Longest single label across members.
    pub longest_label_len: u32,
    /// Longest full name across members.
    pub total_len: u32,
    pub distinct_subdomains_in_family: u32,
    /// Member names with counts.
    pub members: Vec<(String, u64)>,
}

/// The part of a name left of its registered suffix ("t1.b" for
/// "t1.b.tunnel.com"); empty when the name is the registered domain itself.
fn subdomain_part<'a>(qname: &'a str, suffix: &str) -> &'a str {
    if qname.len() > suffix.len() && qname.ends_with(suffix) {
        let head = &qname[..qname.len() - suffix.len()];
        head.strip_suffix('.').unwrap_or(head)
    } else {
        ""
    }
}

fn nonalpha_fraction(text: &str) -> f64 {
    let mut total = 0u32;
    let mut nonalpha = 0u32;
    for c in text.chars().filter(|&c| c != '.') {
        total += 1;
        if !c.is_ascii_alphabetic() {
            nonalpha += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        nonalpha as f64 / total as f64
    }
}

/// Groups names by registered suffix and aggregates the per-family features.
pub fn build_evidence(domains: &[(String, u64)]) -> Vec<DomainEvidence> {
    let mut families: BTreeMap<String, Vec<(String, u64)>> = BTreeMap::new();
    for (name, count) in domains {
        families
            .entry(registered_suffix(name))
            .or_default()
            .push((name.clone(), *count));
    }
    families
        .into_iter()
        .map(|(family, mut members)| {
            members.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut entropy = 0.0f64;
            let mut nonalpha = 0.0f64;
            let mut longest_label = 0u32;
            let mut total_len = 0u32;
            let mut access = 0u64;
            let distinct: BTreeSet<&str> = members.iter().map(|(n, _)| n.as_str()).collect();
            for (name, count) in &members {
                access += count;
                total_len = total_len.max(name.len() as u32);
                for label in name.split('.') {
                    longest_label = longest_label.max(label.len() as u32);
                }
                let sub = subdomain_part(name, &family);
                if !sub.is_empty() {
                    if let Ok(h) = shannon_entropy(sub) {
                        entropy = entropy.max(h);
                    }
                    nonalpha = nonalpha.max(nonalpha_fraction(sub));
                }
            }
            DomainEvidence {
                family,
                access_count: access,
                entropy_bits_per_char: entropy,
                nonalpha_ratio: nonalpha,
                longest_label_len: longest_label,
                total_len,
                distinct_subdomains_in_family: distinct.len() as u32,
                members,
            }
        })
        .collect()
}

/// Numeric rule thresholds; the defaults are deliberately configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    /// R1: full name longer than this many characters.
    pub len_rule: u32,
    /// R2: subdomain entropy above this many bits per character.
    pub entropy_rule: f64,
    /// R3: non-alphabetic fraction above this.
    pub nonalpha_rule: f64,
    /// R4: at least this many distinct names in the family...
    pub fanout_subdomains: u32,
    /// ...carrying at least this many queries.
    pub fanout_queries: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            len_rule: 52,
            entropy_rule: 3.5,
            nonalpha_rule: 0.35,
            fanout_subdomains: 10,
            fanout_queries: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Classification {
    Benign,
    Suspicious,
    Tunnel,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub family: String,
    pub classification: Classification,
    /// Every fired rule, with the value that fired it.
    pub reasons: Vec<String>,
}

/// Scores one family. Whitelisted families are benign unconditionally.
/// Otherwise the payload group (entropy, non-alpha) and the scale group
/// (length, fan-out) fire independently: both groups → tunnel, exactly one
/// → suspicious, none → benign.
pub fn classify(evidence: &DomainEvidence, whitelist: &Whitelist, thresholds: &Thresholds) -> Verdict {
    if whitelist.contains(&evidence.family) {
        return Verdict {
            family: evidence.family.clone(),
            classification: Classification::Benign,
            reasons: Vec::new(),
        };
    }
    let mut reasons = Vec::new();
    let r1 = evidence.total_len > thresholds.len_rule;
    if r1 {
        reasons.push(format!("long_name({} > {})", evidence.total_len, thresholds.len_rule));
    }
    let r2 = evidence.entropy_bits_per_char > thresholds.entropy_rule;
    if r2 {
        reasons.push(format!(
            "high_entropy({:.2} > {:.2})",
            evidence.entropy_bits_per_char, thresholds.entropy_rule
        ));
    }
    let r3 = evidence.nonalpha_ratio > thresholds.nonalpha_rule;
    if r3 {
        reasons.push(format!(
            "nonalpha({:.2} > {:.2})",
            evidence.nonalpha_ratio, thresholds.nonalpha_rule
        ));
    }
    let r4 = evidence.distinct_subdomains_in_family >= thresholds.fanout_subdomains
        && evidence.access_count >= thresholds.fanout_queries;
    if r4 {
        reasons.push(format!(
            "fanout({} names, {} queries)",
            evidence.distinct_subdomains_in_family, evidence.access_count
        ));
    }
    let payload = r2 || r3;
    let scale = r1 || r4;
    let classification = if payload && scale {
        Classification::Tunnel
    } else if payload || scale {
        Classification::Suspicious
    } else {
        Classification::Benign
    };
    Verdict { family: evidence.family.clone(), classification, reasons }
}

/// Plug-in point for external verification stages (e.g. sandbox replay of
/// the suspicious traffic against live resolvers). Implementations may
/// override a verdict; the built-in pipeline ships none.
pub trait Verifier {
    fn verify(&self, evidence: &DomainEvidence, verdict: &Verdict) -> Option<Verdict>;
}
