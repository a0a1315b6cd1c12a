//! Command-line front end: every subcommand reads one `key = value` config
//! file, optionally adjusted with `--set key=value`.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use inn_core::{Error, ErrorKind, Result};

pub use config::RunConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Model => EXIT_MODEL,
        ErrorKind::Io => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "inn", version, about = "Relevance filtering with keyword-graph knowledge")]
pub struct Cli {
    /// Run configuration (key = value lines).
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config entry, e.g. `--set epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export knowledge matrices and vocabulary (cached).
    Featurize,
    /// Train the configured variant; writes the model and history.csv.
    Train,
    /// Score a labeled corpus (default: the held-out test split).
    Evaluate {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Knowledge-only model with each score column zeroed in turn.
    Ablate,
    /// Retrain on stratified fractions of the training split.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Rank documents by relevance score.
    Filter {
        #[arg(long)]
        input: PathBuf,
        /// Also split into kept.jsonl / dropped.jsonl at this score.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Generate a labeled synthetic corpus.
    Synth {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Featurize => commands::featurize_cmd(&cfg).map(drop),
        Command::Train => commands::train_cmd(&cfg).map(drop),
        Command::Evaluate { input } => commands::evaluate_cmd(&cfg, input.as_deref()).map(drop),
        Command::Ablate => commands::ablate_cmd(&cfg).map(drop),
        Command::Sweep { fractions } => commands::sweep_cmd(&cfg, fractions.as_deref()).map(drop),
        Command::Filter { input, threshold } => commands::filter_cmd(&cfg, input, *threshold).map(drop),
        Command::Synth { output } => commands::synth_cmd(&cfg, output.as_deref()).map(drop),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
