//! `scod` — drive the sensory-commutativity pipeline end to end.
//!
//! Five subcommands mirror the pipeline stages: `gen-data` renders a
//! training dataset, `train` fits the mask predictor on it, `sc-run`
//! executes one experiment from a chosen pose, `map` sweeps experiments
//! over a spatial grid, and `eval` scores a predictor on the held-out test
//! sets. All knobs live in a config file; `--seed` and `--out` override the
//! corresponding config keys so scripted sweeps don't need one file per
//! run. Exit codes: 0 success, 1 usage error, 2 data/config error,
//! 3 failed `--strict` quality gate.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;
use config::{load_config, RunConfig};

#[derive(Parser)]
#[command(name = "scod", version, about = "Sensory-commutativity object discovery pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorChoice {
    /// Trained network loaded from `--params`.
    Learned,
    /// Ground-truth masks read back from the simulator.
    Oracle,
    /// Thresholded per-pixel frame differencing.
    Naive,
}

#[derive(Args)]
struct PredictorArgs {
    #[arg(long, value_enum, default_value = "learned")]
    predictor: PredictorChoice,
    /// Trained parameter file (required with `--predictor learned`).
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mask-prediction dataset and its manifest.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the mask predictor on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset file (defaults to `<out>/dataset.scds`).
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
    },
    /// Run one experiment from a given base pose and export its frames.
    ScRun {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        heading: f64,
    },
    /// Sweep experiments over a grid and export the probability heatmap.
    Map {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        predictor: PredictorArgs,
        /// Fail (exit 3) unless open cells stay light and wall cells dark.
        #[arg(long)]
        strict: bool,
    },
    /// Score a predictor on the in-distribution and generalization sets.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        predictor: PredictorArgs,
        /// Fail (exit 3) unless the quality gates pass.
        #[arg(long)]
        strict: bool,
    },
}

fn effective_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(&common.config).map_err(CliError::Data)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::GenData { common } => commands::cmd_gen_data(&effective_config(common)?),
        Command::Train { common, data } => {
            commands::cmd_train(&effective_config(common)?, data.as_deref())
        }
        Command::ScRun { common, predictor, x, y, heading } => {
            let cfg = effective_config(common)?;
            let pred = commands::make_predictor(predictor.predictor, predictor.params.as_deref())?;
            commands::cmd_sc_run(&cfg, pred.as_ref(), *x, *y, *heading)
        }
        Command::Map { common, predictor, strict } => {
            let cfg = effective_config(common)?;
            let pred = commands::make_predictor(predictor.predictor, predictor.params.as_deref())?;
            commands::cmd_map(&cfg, pred.as_ref(), *strict)
        }
        Command::Eval { common, predictor, strict } => {
            let cfg = effective_config(common)?;
            let pred = commands::make_predictor(predictor.predictor, predictor.params.as_deref())?;
            commands::cmd_eval(&cfg, pred.as_ref(), *strict)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the same error path; only
            // genuine parse failures are usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            // A closed pipe (e.g. `scod ... | head`) is not an error.
            use std::io::Write as _;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: cannot write to stdout: {e}");
                    ExitCode::from(2)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
