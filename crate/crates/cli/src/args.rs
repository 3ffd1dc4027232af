use std::net::IpAddr;
use std::path::PathBuf;

use bru_core::report::{Convention, Format, PlotKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bru", version, about = "Abstention-aware cognitive-bias MCQ evaluation")]
pub struct Cli {
    /// Directory holding run sub-directories.
    #[arg(long, global = true, env = "BRU_RUN_DIR", default_value = "runs")]
    pub run_dir: PathBuf,

    /// Taxonomy file replacing the built-in labels.
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset against every schema and manifest rule.
    Validate(ValidateArgs),
    /// Run one condition from a run config.
    Run(RunArgs),
    /// Score a run and write scores.json into its directory.
    Score(ScoreArgs),
    /// Render a summary table over one or more runs.
    Report(ReportArgs),
    /// Emit plot series as JSON.
    Plot(PlotArgs),
    /// Detection-only pass over a dataset.
    Detect(DetectArgs),
    /// Re-execute a stored run from its cache and print the record.
    Replay(ReplayArgs),
    /// Reasoning review.
    Review {
        #[command(subcommand)]
        command: ReviewCommand,
    },
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub dataset: PathBuf,
    /// JSON object of subtype → expected count.
    #[arg(long, conflicts_with = "full")]
    pub manifest: Option<PathBuf>,
    /// Check against the full 205-item manifest.
    #[arg(long)]
    pub full: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Override the run id from the config.
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub run_id: String,
    /// Annotation JSONL applied on top of the run's journal.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Write scores here instead of the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub run_ids: Vec<String>,
    #[arg(long, default_value = "md", value_parser = parse_format)]
    pub format: Format,
    #[arg(long)]
    pub per_subtype: bool,
    /// Error-rate conventions to include; both by default.
    #[arg(long = "convention", value_enum)]
    pub conventions: Vec<ConventionArg>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(required = true)]
    pub run_ids: Vec<String>,
    #[arg(long, value_parser = parse_plot_kind)]
    pub kind: PlotKind,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub dataset: PathBuf,
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub run_id: String,
    /// Write the record here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// Serve the review API and, when present, the UI bundle.
    Serve(ServeArgs),
    /// Write a run's active annotations as JSONL.
    Export { run_id: String, path: PathBuf },
    /// Append annotations from JSONL after validating every item id.
    Import { run_id: String, path: PathBuf },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub run_id: String,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Built UI bundle to serve at `/`.
    #[arg(long, env = "BRU_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Defined,
    Reported,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Defined => Convention::Defined,
            ConventionArg::Reported => Convention::Reported,
        }
    }
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: bru_core::report::ReportError| e.to_string())
}

fn parse_plot_kind(s: &str) -> Result<PlotKind, String> {
    s.parse().map_err(|e: bru_core::report::ReportError| e.to_string())
}
