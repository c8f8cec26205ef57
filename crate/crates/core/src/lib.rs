//! Passive DNS tunnel detection from domain-name length statistics.
//!
//! The pipeline: parse captured DNS traffic into query records, build the
//! two sample spaces (unique names and access-weighted names), fit a normal
//! curve to each length histogram, derive a per-length tolerance band from
//! the one-sample Kolmogorov-Smirnov critical value, extract burr points,
//! difference burrs across sliding time windows, and score the surviving
//! domain families with payload/traffic heuristics.
//!
//! The crate is `no_std` (alloc required); all file formats, IO and the CLI
//! live in the companion `burrscan` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod burr;
pub mod fit;
pub mod ingest;
pub mod sample;
pub mod synth;
pub mod verify;
pub mod window;

pub use burr::{band_table, delineation_band, detect_burrs, excess_bound, BandRow, BurrMode, BurrPoint, ToleranceBand};
pub use fit::{fit_gaussian, ks_critical_value, ks_statistic, theoretical_cdf, GaussianFit, KsResult};
pub use ingest::{decode_qname, encode_qname, normalize_qname, CaptureParser, IngestStats, QueryRecord};
pub use sample::{build_space, build_spaces, empirical_cdf, length_histogram, DomainSampleSpace, EmpiricalCdf, LengthHistogram, SpaceKind};
pub use synth::{confusion_metrics, generate_benign, inject_tunnel, BenignModel, ConfusionCounts, Metrics, TunnelModel};
pub use verify::{build_evidence, classify, registered_suffix, shannon_entropy, Classification, DomainEvidence, Thresholds, Verdict, Whitelist};
pub use window::{analyze_window, burr_matrix, cut_windows, cut_windows_with_stride, sudden_burrs, AnalysisParams, BurrMatrix, SuddenBurrReport, TimeWindow, WindowResult};
