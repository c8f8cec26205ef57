//! Seed-deterministic synthetic traffic: benign background following the
//! length law (names drawn from a rounded, clipped normal, each visited
//! uniformly 1..M times), tunnel-burst injection with encoded labels, and
//! the confusion-matrix evaluation metrics.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::QueryRecord;

/// Background-traffic model: `unique_names` distinct names whose lengths
/// follow round(Normal(mu, sigma)) clipped to `length_clip`, each replicated
/// uniformly 1..=max_visits times at uniform timestamps over the span.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct BenignModel {
    pub unique_names: u32,
    pub mu: f64,
    pub sigma: f64,
    pub length_clip: (u32, u32),
    pub max_visits: u32,
    pub start_us: i64,
    pub span_us: i64,
    pub seed: u64,
}

impl Default for BenignModel {
    fn default() -> Self {
        BenignModel {
            unique_names: 5_000,
            mu: 15.0,
            sigma: 5.0,
            length_clip: (4, 60),
            max_visits: 20,
            start_us: 0,
            span_us: 30 * crate::window::MICROS_PER_DAY,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Encoder {
    /// Lowercase base32 alphabet (a-z, 2-7), the common tunnel payload shape.
    #[default]
    Base32Like,
    /// Hex alphabet (0-9, a-f).
    HexLike,
}

/// One injected tunnel burst: `query_count` queries with random encoded left
/// labels padded to exactly `qname_len` under `suffix`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct TunnelModel {
    pub suffix: String,
    pub qname_len: u32,
    pub query_count: u32,
    pub burst_start_us: i64,
    pub burst_span_us: i64,
    pub encoder: Encoder,
    pub seed: u64,
}

impl Default for TunnelModel {
    fn default() -> Self {
        TunnelModel {
            suffix: String::from("b.tunnel.com"),
            qname_len: 67,
            query_count: 5_000,
            burst_start_us: 0,
            burst_span_us: crate::window::MICROS_PER_DAY,
            encoder: Encoder::Base32Like,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidModel(pub &'static str);

impl fmt::Display for InvalidModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid synthesis model: {}", self.0)
    }
}

impl core::error::Error for InvalidModel {}

// ── Benign name synthesis ───────────────────────────────────────────

const CONSONANTS: &[u8] = b"bcdfghklmnprstvwz";
const VOWELS: &[u8] = b"aeiou";
const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
const PREFIXES: &[&str] = &["www", "api", "cdn", "img", "app", "ns1", "ftp", "vpn"];
// popular suffixes repeated for weight, plus a wide ccTLD tail so even
// 4-char names have namespace to stay distinct in at scale
#[rustfmt::skip]
const SUFFIXES: &[&str] = &[
    "com", "com", "com", "com", "com", "com", "com", "com", "net", "net",
    "net", "net", "org", "org", "org", "info", "info", "io", "io", "co.uk",
    "io", "co", "de", "uk", "jp", "cn", "ru", "fr", "nl", "au", "br", "in",
    "it", "es", "se", "no", "fi", "dk", "pl", "ch", "at", "be", "cz", "gr",
    "hu", "ie", "il", "kr", "mx", "nz", "pt", "ro", "sg", "th", "tr", "tw",
    "ua", "us", "za", "ae", "af", "al", "am", "ao", "az", "ba", "bd", "bg",
    "bh", "bo", "by", "ca", "cd", "cg", "ci", "cl", "cm", "cr", "cu", "cy",
    "do", "dz", "ec", "ee", "eg", "et", "ge", "gh", "gt", "hk", "hn", "hr",
    "ht", "id", "iq", "ir", "is", "jm", "jo", "ke", "kg", "kh", "kw", "kz",
    "la", "lb", "lk", "lt", "lu", "lv", "ly", "ma", "md", "me", "mg", "mk",
    "ml", "mm", "mn", "mt", "mu", "mv", "my", "ng", "ni", "np", "om", "pa",
    "pe", "ph", "pk", "py", "qa", "rs", "rw", "sa", "sd", "si", "sk", "sn",
    "sv", "sy", "tj", "tn", "tz", "uy", "uz", "ve", "vn", "ye", "zm", "zw",
];

fn cv_word(rng: &mut ChaCha12Rng, len: usize) -> String {
    let mut s = String::with_capacity(len);
    if len <= 2 {
        for _ in 0..len {
            s.push(ALNUM[rng.gen_range(0..ALNUM.len())] as char);
        }
        return s;
    }
    let mut consonant = rng.gen_bool(0.7);
    for _ in 0..len {
        let set = if consonant { CONSONANTS } else { VOWELS };
        s.push(set[rng.gen_range(0..set.len())] as char);
        consonant = !consonant;
    }
    s
}

/// A name of exactly `len` characters: optional boring service prefix, a
/// pronounceable word, and a suffix from the pool.
fn benign_name(rng: &mut ChaCha12Rng, len: u32) -> String {
    let len = len as usize;
    let want_prefix = len >= 12 && rng.gen_bool(0.3);
    for _ in 0..64 {
        let prefix = if want_prefix {
            Some(PREFIXES[rng.gen_range(0..PREFIXES.len())])
        } else {
            None
        };
        let fixed = prefix.map(|p| p.len() + 1).unwrap_or(0);
        let suffix = SUFFIXES[rng.gen_range(0..SUFFIXES.len())];
        let need = fixed + 1 + 1 + suffix.len(); // word >= 1 char plus dot
        if need > len {
            continue; // suffix too long for this target, redraw
        }
        let word = cv_word(rng, len - fixed - 1 - suffix.len());
        let mut name = String::with_capacity(len);
        if let Some(p) = prefix {
            name.push_str(p);
            name.push('.');
        }
        name.push_str(&word);
        name.push('.');
        name.push_str(suffix);
        debug_assert_eq!(name.len(), len);
        return name;
    }
    // target shorter than any structural form: fall back to a flat label
    let mut name = cv_word(rng, len.saturating_sub(3));
    name.push_str(".io");
    name
}

/// Generates the benign record stream. Deterministic per seed: identical
/// seeds produce byte-identical streams.
pub fn generate_benign(model: &BenignModel) -> Result<Vec<QueryRecord>, InvalidModel> {
    if model.unique_names == 0 {
        return Err(InvalidModel("unique_names must be at least 1"));
    }
    if model.max_visits == 0 {
        return Err(InvalidModel("max_visits must be at least 1"));
    }
    if model.length_clip.0 >= model.length_clip.1 {
        return Err(InvalidModel("length_clip min must be below max"));
    }
    if model.length_clip.0 < 4 {
        return Err(InvalidModel("length_clip min below 4 cannot form a name"));
    }
    if model.span_us <= 0 {
        return Err(InvalidModel("span must be positive"));
    }
    if model.sigma <= 0.0 {
        return Err(InvalidModel("sigma must be positive"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(model.seed);
    let normal = Normal::new(model.mu, model.sigma).map_err(|_| InvalidModel("bad length law"))?;
    let (lo, hi) = model.length_clip;

    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut records = Vec::new();
    for _ in 0..model.unique_names {
        let draw: f64 = normal.sample(&mut rng);
        let len = (libm::round(draw) as i64).clamp(lo as i64, hi as i64) as u32;
        let mut name = benign_name(&mut rng, len);
        let mut tries = 0u32;
        while seen.contains(&name) {
            name = benign_name(&mut rng, len);
            tries += 1;
            if tries > 10_000 {
                return Err(InvalidModel("name space exhausted at a clipped length"));
            }
        }
        seen.insert(name.clone());

        let visits = rng.gen_range(1..=model.max_visits);
        for _ in 0..visits {
            let ts = model.start_us + rng.gen_range(0..model.span_us);
            let qtype = if rng.gen_bool(0.8) { 1 } else { 28 };
            records.push(QueryRecord::new(ts, &name, qtype, None));
        }
    }
    records.sort_unstable_by(|a, b| {
        a.timestamp_us
            .cmp(&b.timestamp_us)
            .then_with(|| a.qname.cmp(&b.qname))
    });
    Ok(records)
}

// ── Tunnel injection ────────────────────────────────────────────────

fn encoded_labels(rng: &mut ChaCha12Rng, encoder: Encoder, mut fill: usize) -> String {
    let alphabet: &[u8] = match encoder {
        Encoder::Base32Like => b"abcdefghijklmnopqrstuvwxyz234567",
        Encoder::HexLike => b"0123456789abcdef",
    };
    let mut out = String::with_capacity(fill);
    loop {
        let take = if fill > 63 {
            if fill == 64 {
                62
            } else {
                63
            }
        } else {
            fill
        };
        for _ in 0..take {
            out.push(alphabet[rng.gen_range(0..alphabet.len())] as char);
        }
        fill -= take;
        if fill == 0 {
            break;
        }
        out.push('.');
        fill -= 1;
    }
    out
}

/// Appends `query_count` tunnel queries to `records` and re-sorts the merged
/// stream by timestamp. Injected names are exactly `qname_len` characters.
pub fn inject_tunnel(
    mut records: Vec<QueryRecord>,
    model: &TunnelModel,
) -> Result<Vec<QueryRecord>, InvalidModel> {
    if model.query_count == 0 {
        return Err(InvalidModel("query_count must be at least 1"));
    }
    if (model.qname_len as usize) < model.suffix.len() + 2 {
        return Err(InvalidModel("qname_len leaves no room for a payload label"));
    }
    if model.burst_span_us <= 0 {
        return Err(InvalidModel("burst span must be positive"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(model.seed);
    let suffix = crate::ingest::normalize_qname(&model.suffix);
    let fill = model.qname_len as usize - suffix.len() - 1;
    for _ in 0..model.query_count {
        let left = encoded_labels(&mut rng, model.encoder, fill);
        let name = alloc::format!("{left}.{suffix}");
        debug_assert_eq!(name.len(), model.qname_len as usize);
        let ts = model.burst_start_us + rng.gen_range(0..model.burst_span_us);
        records.push(QueryRecord::new(ts, &name, 16, None));
    }
    records.sort_unstable_by(|a, b| {
        a.timestamp_us
            .cmp(&b.timestamp_us)
            .then_with(|| a.qname.cmp(&b.qname))
    });
    Ok(records)
}

// ── Evaluation metrics ──────────────────────────────────────────────

/// Outcome counts; the positive class is the caller's business and both
/// polarities are reported by the evaluation layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_neg: u64,
    pub false_pos: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    /// Swaps the positive class.
    pub fn inverted(self) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: self.true_neg,
            false_neg: self.false_pos,
            false_pos: self.false_neg,
            true_neg: self.true_pos,
        }
    }
}

/// Metrics are absent (not zero) when their denominator is empty.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// accuracy = (TP+TN)/total, precision = TP/(TP+FP), recall = TP/(TP+FN),
/// f1 = 2 / (precision^-1 + recall^-1).
pub fn confusion_metrics(c: &ConfusionCounts) -> Metrics {
    let total = c.true_pos + c.false_neg + c.false_pos + c.true_neg;
    let accuracy = (total > 0).then(|| (c.true_pos + c.true_neg) as f64 / total as f64);
    let precision =
        (c.true_pos + c.false_pos > 0).then(|| c.true_pos as f64 / (c.true_pos + c.false_pos) as f64);
    let recall =
        (c.true_pos + c.false_neg > 0).then(|| c.true_pos as f64 / (c.true_pos + c.false_neg) as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Metrics { accuracy, precision, recall, f1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{build_space, SpaceKind};
    use crate::verify::shannon_entropy;

    #[test]
    fn deterministic_per_seed() {
        let model = BenignModel { unique_names: 500, ..BenignModel::default() };
        let a = generate_benign(&model).unwrap();
        let b = generate_benign(&model).unwrap();
        assert_eq!(a, b);
        let c = generate_benign(&BenignModel { seed: 2, ..model }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn names_have_exact_drawn_lengths_and_clip() {
        let model = BenignModel {
            unique_names: 3_000,
            mu: 10.0,
            sigma: 8.0,
            ..BenignModel::default()
        };
        let records = generate_benign(&model).unwrap();
        for r in &records {
            assert!(r.qname_len >= 4 && r.qname_len <= 60, "{}", r.qname);
            assert_eq!(r.qname_len as usize, r.qname.len());
            assert_eq!(r.qname, crate::ingest::normalize_qname(&r.qname));
        }
    }

    #[test]
    fn m_equal_one_makes_spaces_identical() {
        let model = BenignModel {
            unique_names: 2_000,
            max_visits: 1,
            ..BenignModel::default()
        };
        let records = generate_benign(&model).unwrap();
        let dnss = build_space(records.iter(), SpaceKind::Dnss);
        let adnss = build_space(records.iter(), SpaceKind::Adnss);
        assert_eq!(dnss.capacity(), adnss.capacity());
        assert!(dnss.entries().eq(adnss.entries()));
    }

    #[test]
    fn replication_counts_within_bounds() {
        let model = BenignModel {
            unique_names: 1_000,
            max_visits: 7,
            ..BenignModel::default()
        };
        let records = generate_benign(&model).unwrap();
        let adnss = build_space(records.iter(), SpaceKind::Adnss);
        assert_eq!(adnss.distinct(), 1_000);
        for (_, c) in adnss.entries() {
            assert!((1..=7).contains(&c));
        }
    }

    #[test]
    fn injection_bookkeeping() {
        let model = BenignModel { unique_names: 1_000, ..BenignModel::default() };
        let records = generate_benign(&model).unwrap();
        let tunnel = TunnelModel {
            query_count: 5_000,
            qname_len: 67,
            ..TunnelModel::default()
        };
        let merged = inject_tunnel(records.clone(), &tunnel).unwrap();
        assert_eq!(merged.len(), records.len() + 5_000);

        let before = build_space(records.iter(), SpaceKind::Adnss);
        let after = build_space(merged.iter(), SpaceKind::Adnss);
        let count_at = |space: &crate::sample::DomainSampleSpace, len: u32| -> u64 {
            space
                .entries()
                .filter(|(n, _)| n.len() as u32 == len)
                .map(|(_, c)| c)
                .sum()
        };
        assert_eq!(count_at(&after, 67), count_at(&before, 67) + 5_000);
        // merged stream stays time-sorted
        assert!(merged.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us));
    }

    #[test]
    fn injected_labels_are_high_entropy() {
        let tunnel = TunnelModel { query_count: 1_000, qname_len: 67, ..TunnelModel::default() };
        let merged = inject_tunnel(Vec::new(), &tunnel).unwrap();
        let mut above = 0;
        for r in &merged {
            assert_eq!(r.qname_len, 67);
            let left = r.qname.strip_suffix(".b.tunnel.com").unwrap();
            if shannon_entropy(left).unwrap() > 3.5 {
                above += 1;
            }
        }
        assert!(above >= 990, "{above}/1000 above 3.5 bits/char");
    }

    #[test]
    fn long_payloads_split_into_valid_labels() {
        let tunnel = TunnelModel {
            query_count: 50,
            qname_len: 200,
            ..TunnelModel::default()
        };
        let merged = inject_tunnel(Vec::new(), &tunnel).unwrap();
        for r in &merged {
            assert_eq!(r.qname_len, 200);
            for label in r.qname.split('.') {
                assert!(!label.is_empty() && label.len() <= 63);
            }
        }
    }

    #[test]
    fn zero_query_count_rejected() {
        let tunnel = TunnelModel { query_count: 0, ..TunnelModel::default() };
        assert!(inject_tunnel(Vec::new(), &tunnel).is_err());
    }

    #[test]
    fn metrics_formulas() {
        let m = confusion_metrics(&ConfusionCounts {
            true_pos: 9,
            false_neg: 1,
            false_pos: 0,
            true_neg: 10,
        });
        assert_eq!(m.accuracy, Some(0.95));
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(0.9));
        assert!((m.f1.unwrap() - 0.9473684210526315).abs() < 1e-12);
    }

    #[test]
    fn metrics_all_true_pos() {
        let m = confusion_metrics(&ConfusionCounts { true_pos: 42, ..Default::default() });
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(m.recall, Some(1.0));
    }

    #[test]
    fn metrics_absent_on_zero_denominators() {
        let m = confusion_metrics(&ConfusionCounts::default());
        assert_eq!(m, Metrics::default());
        let m = confusion_metrics(&ConfusionCounts { true_neg: 5, ..Default::default() });
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        assert_eq!(m.f1, None);
    }

    #[test]
    fn f1_equals_harmonic_mean() {
        for (tp, fneg, fp, tn) in [(9u64, 1u64, 3u64, 10u64), (5, 5, 5, 5), (1, 9, 9, 1)] {
            let c = ConfusionCounts {
                true_pos: tp,
                false_neg: fneg,
                false_pos: fp,
                true_neg: tn,
            };
            let m = confusion_metrics(&c);
            let p = m.precision.unwrap();
            let r = m.recall.unwrap();
            assert!((m.f1.unwrap() - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverted_counts_swap_classes() {
        let c = ConfusionCounts { true_pos: 1, false_neg: 2, false_pos: 3, true_neg: 4 };
        let i = c.inverted();
        assert_eq!(i.true_pos, 4);
        assert_eq!(i.false_pos, 2);
        assert_eq!(i.inverted(), c);
    }
}
