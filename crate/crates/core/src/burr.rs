//! Per-length tolerance band and burr extraction.
//!
//! The band turns the KS tolerance constant d into a per-length acceptable
//! count interval around the fitted curve: slack(x) = n * (d/(1+d)) * (1 - F(x)),
//! which shrinks as the fitted CDF approaches 1 and vanishes at the far right
//! tail. Burrs are only extracted when the sample actually violates the
//! fitted law, i.e. when max |F(x) - S(x)| exceeds the critical value at the
//! space's effective sample size; a sample consistent with the law has no
//! burrs by definition.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::fit::{ks_critical_value, theoretical_cdf, GaussianFit, UnsupportedAlpha};
use crate::sample::{empirical_cdf, DomainSampleSpace, LengthHistogram};

/// Acceptable count interval at one length.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandEntry {
    /// Fitted curve value.
    pub expected: f64,
    pub upper: f64,
    /// max(0, expected - slack).
    pub lower: f64,
    /// Fitted CDF at this length (continuity-corrected).
    pub f_hat: f64,
}

/// The per-length acceptable band over a histogram's support hull.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceBand {
    entries: BTreeMap<u32, BandEntry>,
    pub alpha: f64,
    /// KS tolerance constant at the histogram's capacity, used for the slack.
    pub d: f64,
    /// KS critical value at the distinct-name count; the law-consistency
    /// gate for burr extraction.
    pub gate_d: f64,
}

impl ToleranceBand {
    pub fn entry(&self, length: u32) -> Option<&BandEntry> {
        self.entries.get(&length)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &BandEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn hull(&self) -> Option<(u32, u32)> {
        Some((
            *self.entries.keys().next()?,
            *self.entries.keys().next_back()?,
        ))
    }
}

/// A length whose observed count escapes the band.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BurrPoint {
    pub length: u32,
    pub observed: u64,
    pub expected: f64,
    pub upper: f64,
    /// How far outside the band the count lies; always > 0.
    pub excess: f64,
}

/// One row of the band/burr export table (the plot-data format).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandRow {
    pub length: u32,
    pub observed: u64,
    pub expected: f64,
    pub lower: f64,
    pub upper: f64,
    pub is_burr: bool,
}

/// Flattens a histogram, its band, and the detected burrs into export rows.
pub fn band_table(hist: &LengthHistogram, band: &ToleranceBand, burrs: &[BurrPoint]) -> Vec<BandRow> {
    band.iter()
        .map(|(length, e)| BandRow {
            length,
            observed: hist.count(length),
            expected: e.expected,
            lower: e.lower,
            upper: e.upper,
            is_burr: burrs.iter().any(|b| b.length == length),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BurrMode {
    /// Only counts above the band are burrs (the default: the bound is an
    /// upper bound on cumulative excess).
    #[default]
    UpperOnly,
    /// Counts below `lower` are reported as well.
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandError {
    /// The fit did not converge; no band can be drawn.
    FitUnavailable,
    EmptyHistogram,
    Alpha(UnsupportedAlpha),
}

impl fmt::Display for BandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandError::FitUnavailable => write!(f, "no converged fit to delineate against"),
            BandError::EmptyHistogram => write!(f, "cannot delineate an empty histogram"),
            BandError::Alpha(a) => a.fmt(f),
        }
    }
}

impl core::error::Error for BandError {}

impl From<UnsupportedAlpha> for BandError {
    fn from(e: UnsupportedAlpha) -> Self {
        BandError::Alpha(e)
    }
}

/// Bound on the cumulative-frequency excess at a point with fitted CDF
/// `f_at_x`, given tolerance constant `d`: (d/(1+d)) * (1 - f_at_x).
pub fn excess_bound(f_at_x: f64, d: f64) -> f64 {
    (d / (1.0 + d)) * (1.0 - f_at_x).max(0.0)
}

/// Builds the acceptable band over the histogram's support hull.
pub fn delineation_band(
    hist: &LengthHistogram,
    fit: &GaussianFit,
    alpha: f64,
) -> Result<ToleranceBand, BandError> {
    if !fit.converged {
        return Err(BandError::FitUnavailable);
    }
    let Some((lo, hi)) = hist.hull() else {
        return Err(BandError::EmptyHistogram);
    };
    let n = hist.n() as f64;
    let d = ks_critical_value(hist.n(), alpha)?;
    // The gate takes the distinct-name count as its sample size: names are
    // the independent draws, and unlike the Kish size this cannot be blown
    // up by one massively repeated name (the very thing being hunted).
    let gate_d = ks_critical_value(hist.distinct().max(1), alpha)?;

    let mut entries = BTreeMap::new();
    for x in lo..=hi {
        let expected = fit.value(x as f64);
        let f_hat = theoretical_cdf(fit, x as f64);
        let slack = n * excess_bound(f_hat, d);
        entries.insert(
            x,
            BandEntry {
                expected,
                upper: expected + slack,
                lower: (expected - slack).max(0.0),
                f_hat,
            },
        );
    }
    Ok(ToleranceBand { entries, alpha, d, gate_d })
}

/// Extracts burr points: lengths whose count escapes the band, provided the
/// sample as a whole fails the KS consistency check against the fitted law.
/// Sorted by descending excess (ties by ascending length); deterministic.
pub fn detect_burrs(hist: &LengthHistogram, band: &ToleranceBand, mode: BurrMode) -> Vec<BurrPoint> {
    let Ok(s) = empirical_cdf(hist) else {
        return Vec::new();
    };
    let Some((lo, hi)) = band.hull() else {
        return Vec::new();
    };

    // Theorem premise: if the observed law still matches the fit, there are
    // no outliers to look for.
    let mut d_stat = 0.0f64;
    for x in lo..=hi {
        let entry = band.entry(x).unwrap();
        let diff = libm::fabs(entry.f_hat - s.eval(x));
        if diff > d_stat {
            d_stat = diff;
        }
    }
    if d_stat <= band.gate_d {
        return Vec::new();
    }

    let mut burrs = Vec::new();
    for (x, entry) in band.iter() {
        let observed = hist.count(x);
        let obs = observed as f64;
        if obs > entry.upper {
            burrs.push(BurrPoint {
                length: x,
                observed,
                expected: entry.expected,
                upper: entry.upper,
                excess: obs - entry.upper,
            });
        } else if mode == BurrMode::TwoSided && obs < entry.lower {
            burrs.push(BurrPoint {
                length: x,
                observed,
                expected: entry.expected,
                upper: entry.upper,
                excess: entry.lower - obs,
            });
        }
    }
    burrs.sort_by(|a, b| {
        b.excess
            .partial_cmp(&a.excess)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.length.cmp(&b.length))
    });
    burrs
}

/// All entries of the space whose name length equals the burr's length,
/// sorted by descending count then name.
pub fn burr_domains(space: &DomainSampleSpace, burr_length: u32) -> Vec<(String, u64)> {
    let mut out: Vec<(String, u64)> = space
        .entries()
        .filter(|(name, _)| name.len() as u32 == burr_length)
        .map(|(name, c)| (String::from(name), c))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}
