mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use emoser_core::ravdess::SplitStrategy;

/// Speech emotion recognition: featurize RAVDESS, train and evaluate the
/// CNN, compare against the MLP baseline, predict and serve.
#[derive(Debug, Parser)]
#[command(name = "emoser", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Stratified,
    Speaker,
}

impl From<StrategyArg> for SplitStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Stratified => SplitStrategy::StratifiedByEmotion,
            StrategyArg::Speaker => SplitStrategy::SpeakerIndependent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Cnn,
    Dnn,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a RAVDESS corpus, print its census and write a feature cache
    Prepare {
        /// Corpus root (extraction target when --archive is given)
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Feature cache to write
        #[arg(long)]
        out: Option<PathBuf>,
        /// ZIP archive to extract into the corpus root first
        #[arg(long)]
        archive: Option<PathBuf>,
        /// JSON config (pipeline settings)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Partition a feature cache into train and test indices
    Split {
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Split file to write (JSON)
        #[arg(long, default_value = "split.json")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a model on the training side of a split
    Train {
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Split file; computed from the config when omitted
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Architecture (overrides the config)
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long)]
        checkpoint_out: Option<PathBuf>,
        /// Per-epoch history; `.json` writes JSON, anything else CSV
        #[arg(long)]
        history_out: Option<PathBuf>,
        /// Learning curves as SVG
        #[arg(long)]
        curves_out: Option<PathBuf>,
        /// Override the configured epoch count
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a checkpoint on the test side of a split
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Split file; the whole cache is scored when omitted
        #[arg(long)]
        split: Option<PathBuf>,
        /// Metrics report to write (JSON)
        #[arg(long)]
        report_out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the CNN and the DNN baseline and tabulate their test scores
    Compare {
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comparison report to write (JSON)
        #[arg(long)]
        report_out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Classify one WAV file
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
    },
    /// Verify every backward pass against finite differences
    Gradcheck {
        /// First seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to run
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
    /// Run the HTTP inference service
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory of static files served at `/`
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Bad invocation or config; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("EMOSER_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("EMOSER_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = configure_threads().and_then(|()| commands::run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.chain().any(|e| e.downcast_ref::<UsageError>().is_some()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
