use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] physcorrect_core::Error),
    #[error("config {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 3 for simulation divergence, 2 for every input error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(physcorrect_core::Error::SimDiverged { .. }) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "physcorrect",
    version,
    about = "Physics-aware correction of multi-person motion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Control iterations per frame.
    #[arg(long = "loop-n", global = true)]
    pub loop_n: Option<usize>,
    /// Frame rate override (Hz).
    #[arg(long, global = true)]
    pub fps: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write the per-frame dynamics stream.
    #[arg(long, global = true)]
    pub diagnostics: bool,
    /// Report metrics in SI units (m) instead of mm.
    #[arg(long, global = true)]
    pub si: bool,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Correct a motion file.
    Correct {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score a prediction against ground truth.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Correct and score once per loop count.
    Sweep {
        input: PathBuf,
        /// Comma-separated loop counts, e.g. 1,2,3,4,5.
        #[arg(long = "n-values", value_delimiter = ',', num_args = 0..)]
        n_values: Vec<usize>,
        /// Ground truth for scoring; defaults to the input.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic scenario.
    Synth {
        scenario: String,
        /// Number of frames.
        #[arg(long, default_value_t = physcorrect_core::synth::DEFAULT_FRAMES)]
        frames: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Convert an external format into a motion file.
    Import {
        #[arg(long)]
        from: String,
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Correct { input, common } => commands::correct(&input, &common),
        Command::Eval { pred, gt, common } => commands::eval(&pred, &gt, &common),
        Command::Sweep {
            input,
            n_values,
            gt,
            common,
        } => commands::sweep(&input, &n_values, gt.as_deref(), &common),
        Command::Synth {
            scenario,
            frames,
            common,
        } => commands::synth(&scenario, frames, &common),
        Command::Import {
            from,
            input,
            common,
        } => commands::import(&from, &input, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
