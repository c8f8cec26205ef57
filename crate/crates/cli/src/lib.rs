//! File formats, report writers, and the command implementations behind the
//! `burrscan` binary. The statistics live in `burrscan-core`; everything
//! here is IO.

pub mod formats;
pub mod report;
pub mod run;

pub use run::{cmd_analyze, cmd_eval, cmd_synth, AnalyzeConfig, AnalyzeOutcome, EvalOutcome};
