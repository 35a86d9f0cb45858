use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use e2c_core::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "e2c", version, about = "Equity-to-credit spreads with a random forest refinement")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. They override the config file, which
/// overrides the built-in defaults.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for forest training (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for every output file (default: current directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Append E2C and CreditGrades spreads to a firm snapshot file.
    Spread {
        /// Snapshot CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a forest and write the model bundle, split manifest and R².
    Train {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare CDS, E2C, CreditGrades and forest spreads bucket by bucket.
    Evaluate {
        /// Model bundle written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Encode categories the model has not seen as all-zero dummies
        /// instead of refusing the dataset.
        #[arg(long)]
        lenient: bool,
        #[command(flatten)]
        common: Common,
    },
    /// MDI and out-of-bag permutation importance of a trained forest.
    Importance {
        #[arg(long)]
        model: PathBuf,
        /// The snapshot file the model was trained on.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate the synthetic acceptance panel as a snapshot file.
    Synth {
        #[arg(long, default_value_t = 300)]
        firms: usize,
        #[arg(long, default_value_t = 150)]
        dates: usize,
        /// R² of the noise-free signal; 1 gives a noiseless panel.
        #[arg(long, default_value_t = 0.9)]
        bayes_r2: f64,
        /// Probability that a row loses its CDS quote.
        #[arg(long, default_value_t = 0.0)]
        missing_rate: f64,
        #[command(flatten)]
        common: Common,
    },
}

/// Exit status for each error class: 2 input format, 3 pipeline
/// precondition, 4 compatibility.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format { .. } | Error::MissingColumn(_) | Error::Csv(_) | Error::Io(_) => 2,
        Error::Domain(_) | Error::Undefined(_) => 3,
        Error::Incompatible(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spread { input, common } => commands::spread(input, &common),
        Command::Train { input, common } => commands::train(input, &common),
        Command::Evaluate {
            model,
            input,
            lenient,
            common,
        } => commands::evaluate(&model, input, lenient, &common),
        Command::Importance { model, input, common } => commands::importance(&model, input, &common),
        Command::Synth {
            firms,
            dates,
            bayes_r2,
            missing_rate,
            common,
        } => commands::synth(firms, dates, bayes_r2, missing_rate, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
