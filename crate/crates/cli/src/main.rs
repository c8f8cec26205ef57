use std::path::PathBuf;
use std::process::ExitCode;

use burrscan::run::{cmd_analyze, cmd_eval, cmd_synth, AnalyzeConfig};
use burrscan_core::BurrMode;
use clap::{Parser, Subcommand, ValueEnum};

/// Offline DNS tunnel detector: fits a normal curve to domain-name length
/// histograms per time window, extracts burr lengths outside the tolerance
/// band, differences them across windows, and scores the surviving domain
/// families.
#[derive(Parser)]
#[command(name = "burrscan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Flag only counts above the band (default).
    Upper,
    /// Also flag counts below the band.
    TwoSided,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full detection pipeline over captures and/or query logs.
    Analyze {
        /// Input files: classic pcap captures or query-log CSVs (repeatable).
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Window duration in days (30 recommended; < 14 warns).
        #[arg(long, default_value_t = 30.0)]
        window_days: f64,
        /// Optional sliding stride in days; defaults to the window size.
        #[arg(long)]
        stride_days: Option<f64>,
        /// Significance level: 0.10, 0.05 or 0.01.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Upper)]
        mode: ModeArg,
        /// Whitelist file: one registered-domain suffix per line.
        #[arg(long)]
        whitelist: Option<PathBuf>,
        /// Thresholds JSON for the verification rules.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Output directory for all report artifacts.
        #[arg(long)]
        out: PathBuf,
        /// UDP port the capture filter matches.
        #[arg(long, default_value_t = 53)]
        port: u16,
    },
    /// Generate a labeled synthetic dataset from a spec file.
    Synth {
        /// Synthesis spec JSON ({"benign": {...}, "tunnels": [...]}).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a run report against a labels CSV.
    Eval {
        /// Directory a previous `analyze` wrote (report.json inside).
        #[arg(long)]
        report: PathBuf,
        /// Labels CSV: qname,label with label in {benign, tunnel}.
        #[arg(long)]
        labels: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BURRSCAN_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze {
            input,
            window_days,
            stride_days,
            alpha,
            mode,
            whitelist,
            thresholds,
            out,
            port,
        } => {
            let config = AnalyzeConfig {
                inputs: input,
                window_days,
                stride_days,
                alpha,
                mode: match mode {
                    ModeArg::Upper => BurrMode::UpperOnly,
                    ModeArg::TwoSided => BurrMode::TwoSided,
                },
                whitelist,
                thresholds,
                out,
                port,
            };
            match cmd_analyze(&config) {
                Ok(outcome) => {
                    println!(
                        "{} windows, {} sudden-burr entries, {} verdicts ({} tunnel)",
                        outcome.report.windows.len(),
                        outcome.report.sudden_burrs.len(),
                        outcome.report.verdicts.len(),
                        outcome.tunnel_families.len()
                    );
                    for family in &outcome.tunnel_families {
                        println!("tunnel: {family}");
                    }
                    if outcome.tunnel_families.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Synth { spec, out } => match cmd_synth(&spec, &out) {
            Ok((records, tunnel_names)) => {
                println!("wrote {records} records ({tunnel_names} tunnel names) to {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Command::Eval { report, labels } => match cmd_eval(&report, &labels) {
            Ok(outcome) => {
                print!("{}", outcome.table);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
