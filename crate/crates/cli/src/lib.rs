//! Command-line front end: file ingestion, experiment orchestration and report emission.

pub mod commands;
pub mod error;
pub mod example_day;
pub mod formats;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use error::{CliError, Result};

pub const SEED_ENV: &str = "DEGRADESCHED_SEED";

#[derive(Debug, Parser)]
#[command(name = "degradesched", version, about = "Degradation-aware microgrid scheduling", args_override_self = true)]
pub struct Cli {
    /// JSON object whose keys override flags of the chosen subcommand
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Repeat for more log output
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run synthetic aging tests and write the training dataset
    SimulateAging(SimulateArgs),
    /// Train the two-stage degradation model (and optionally the benchmarks)
    Train(TrainArgs),
    /// Solve the day-ahead schedule in one of three modes
    Schedule(ScheduleArgs),
    /// Merge per-mode schedules and a trace into plot-ready tables
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON list of aging-test conditions; defaults to the built-in 35-group grid
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Relative label noise sigma
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Aging dataset CSV (its .meta.json sidecar must sit next to it)
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Train every variant and keep the best compatible pair
    #[arg(long, conflicts_with_all = ["ubdf", "bdp"])]
    pub variant_search: bool,
    #[arg(long, requires = "bdp")]
    pub ubdf: Option<u8>,
    #[arg(long, requires = "ubdf")]
    pub bdp: Option<u8>,
    /// Also train NNBD / NNBD2 and write the comparison table
    #[arg(long)]
    pub with_benchmarks: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub decay_every: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Traditional,
    LinearBdc,
    Lod,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Traditional => "traditional",
            Mode::LinearBdc => "linear-bdc",
            Mode::Lod => "lod",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ScheduleArgs {
    /// Case JSON file
    #[arg(long, required_unless_present = "example_day", conflicts_with = "example_day")]
    pub case: Option<PathBuf>,
    /// Use the bundled synthetic day instead of --case
    #[arg(long)]
    pub example_day: bool,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Trained model artifact; required for lod, used for pricing otherwise
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub capital_cost: Option<f64>,
    #[arg(long)]
    pub salvage_value: Option<f64>,
    #[arg(long)]
    pub soh_eol: Option<f64>,
    /// $/kWh throughput charge of the linear-bdc mode
    #[arg(long)]
    pub linear_bdc_rate: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Schedule CSV of the traditional mode
    #[arg(long)]
    pub traditional: PathBuf,
    /// Schedule CSV of the linear-bdc mode
    #[arg(long)]
    pub linear_bdc: PathBuf,
    /// Schedule CSV of the lod mode
    #[arg(long)]
    pub lod: PathBuf,
    /// LOD trace CSV to echo as the cost-versus-iteration series
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `argv`; when `--config` is given its entries are appended as flags,
/// so they take precedence over the command line.
pub fn parse_args<I, T>(argv: I) -> Result<Cli>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = Cli::try_parse_from(&argv).map_err(clap_error)?;
    let Some(path) = first.config else {
        return Ok(first);
    };
    let value: serde_json::Value = formats::read_json(&path)?;
    let serde_json::Value::Object(map) = value else {
        return Err(CliError::format(&path, "config must be a JSON object"));
    };
    let mut full = argv;
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Null | serde_json::Value::Bool(false) => {}
            serde_json::Value::Bool(true) => full.push(flag.into()),
            serde_json::Value::String(s) => full.extend([flag.into(), s.into()]),
            serde_json::Value::Number(n) => full.extend([flag.into(), n.to_string().into()]),
            _ => return Err(CliError::format(&path, format!("`{key}` must be a scalar"))),
        }
    }
    Cli::try_parse_from(&full).map_err(clap_error)
}

fn clap_error(e: clap::Error) -> CliError {
    match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => e.exit(),
        _ => CliError::Usage(e.render().to_string().trim_end().to_owned()),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SimulateAging(a) => commands::simulate_aging(a),
        Command::Train(a) => commands::train(a),
        Command::Schedule(a) => commands::schedule(a),
        Command::Report(a) => commands::report(a),
    }
}
