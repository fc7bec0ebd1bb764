//! `inflacast`: desk-scale pipeline for classifying social-network posts as
//! pro-inflationary vs. disinflationary.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;

/// Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError { code: 2, message: message.into() }
    }
    pub fn runtime(message: impl Into<String>) -> CliError {
        CliError { code: 1, message: message.into() }
    }
}

impl From<inflacast_core::Error> for CliError {
    fn from(e: inflacast_core::Error) -> CliError {
        match e {
            inflacast_core::Error::InvalidConfig(_) => CliError::usage(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "inflacast", version, about = "post-trend classification pipeline")]
struct Cli {
    /// TOML run configuration (defaults apply when omitted)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// master seed; overrides the config seed everywhere
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the member-count and regional-share filters to the group list
    FilterGroups,
    /// Derive trend labels from the inflation series and join them to posts
    Label,
    /// Train one model on the 60/20/20 split and write its checkpoint
    Train {
        /// logreg | tree | forest | gbm | encoder-64 | encoder-128 | encoder-256 | encoder-512
        #[arg(long)]
        model: String,
    },
    /// Evaluate saved models on the test split and print a metrics table
    Evaluate {
        /// model files produced by `train`
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Shapley-attribute one text under a saved model
    Explain {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Generate the synthetic groups/series/posts/negation fixture files
    MakeFixtures,
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("INFLACAST_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::usage(format!("INFLACAST_THREADS is not a number: {v}")))?;
        if n == 0 {
            return Err(CliError::usage("INFLACAST_THREADS must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.forest.seed = seed;
        cfg.train.seed = seed;
        cfg.explain.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::usage(format!("cannot create output dir: {e}")))?;
    cfg.archive(&cli.out)?;
    let log = commands::RunLog::open(&cli.out)?;
    match cli.command {
        Command::FilterGroups => commands::cmd_filter_groups(&cfg, &cli.out, &log),
        Command::Label => commands::cmd_label(&cfg, &cli.out, &log),
        Command::Train { model } => commands::cmd_train(&cfg, &cli.out, &model, &log),
        Command::Evaluate { models } => commands::cmd_evaluate(&cfg, &cli.out, &models, &log),
        Command::Explain { model_file, text } => {
            commands::cmd_explain(&cfg, &cli.out, &model_file, &text, &log)
        }
        Command::MakeFixtures => commands::cmd_make_fixtures(&cfg, &cli.out, &log),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
