use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod config;
mod ingest;
mod report;
mod run;
mod synth;

/// Commodity price forecasting benchmark: ingestion, model runs, reports and
/// synthetic data.
#[derive(Parser, Debug)]
#[command(name = "cropcast", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse raw input/output CSVs into the normalized dataset and validate it
    Ingest(IngestArgs),
    /// Run the split protocol for the selected models
    Run(RunArgs),
    /// Render summary tables from persisted results
    Report(ReportArgs),
    /// Calibrate and generate the synthetic benchmark
    Synth(SynthArgs),
    /// Diebold-Mariano test between two models' persisted forecasts
    Dm(DmArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; nothing is written outside it
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Global seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with status 3 when any cell or table has gaps
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: Common,
    /// Raw input table (prices, marketing percentages, futures, basis)
    #[arg(long)]
    pub input_csv: PathBuf,
    /// Published MYA forecasts and actuals
    #[arg(long)]
    pub output_csv: Option<PathBuf>,
    /// Column mapping TOML (defaults to the bundled mapping)
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// File name of the normalized dataset inside --out
    #[arg(long, default_value = "normalized.csv")]
    pub normalized_out: PathBuf,
    /// Marketing years every price series must cover, `START-END` or `none`
    #[arg(long, default_value = "1997-2024")]
    pub required_years: String,
    /// Largest tolerated share of rejected input rows
    #[arg(long, default_value_t = 0.05)]
    pub max_rejected: f64,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Normalized dataset
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated model families (naive, seasonal_naive, sarima, ets, stl, ptf, rf, gbm)
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Split ids, e.g. `1-16` or `1,5,9`
    #[arg(long)]
    pub splits: Option<String>,
    /// Comma-separated commodities
    #[arg(long, value_delimiter = ',')]
    pub commodities: Option<Vec<String>>,
    /// Externally produced forecast file (repeatable)
    #[arg(long)]
    pub external: Vec<PathBuf>,
    /// Worker threads
    #[arg(long)]
    pub workers: Option<usize>,
    /// Recompute cells that already have results
    #[arg(long)]
    pub force: bool,
    /// Evaluate the synthetic benchmark in this directory instead of the dataset
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Normalized dataset, needed for the USDA comparison tables
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Report on the synthetic-benchmark results
    #[arg(long)]
    pub synthetic: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory inside --out for the benchmark files
    #[arg(long, default_value = "synthetic")]
    pub synth_out: PathBuf,
    /// Series per commodity
    #[arg(long, default_value_t = 100)]
    pub n_series: usize,
    /// Months per series (training plus 12 test months)
    #[arg(long, default_value_t = 156)]
    pub length: usize,
    /// Normalized dataset used to set each commodity's mean level
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    /// Monthly absolute percentage errors pooled over splits and commodities
    Ape,
    /// Annual absolute MYA errors
    Mya,
}

#[derive(Args, Debug)]
pub struct DmArgs {
    #[command(flatten)]
    pub common: Common,
    /// First model
    #[arg(long)]
    pub a: String,
    /// Second model (positive statistic: this one is more accurate)
    #[arg(long)]
    pub b: String,
    #[arg(long, value_enum, default_value_t = LossKind::Ape)]
    pub loss: LossKind,
    /// HAC bandwidth; defaults to 11 for APE and 1 for MYA
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Test years to drop, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<i32>,
    #[arg(long)]
    pub synthetic: bool,
}

/// Why a command stopped; maps onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Validation(String),
    Partial(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Partial(_) => 3,
        }
    }
}

impl From<cropcast::error::Error> for Failure {
    fn from(e: cropcast::error::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Ingest(a) => ingest::cmd_ingest(a),
        Command::Run(a) => run::cmd_run(a),
        Command::Report(a) => report::cmd_report(a),
        Command::Synth(a) => synth::cmd_synth(a),
        Command::Dm(a) => report::cmd_dm(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Input(m) | Failure::Validation(m) | Failure::Partial(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
