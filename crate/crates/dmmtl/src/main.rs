//! Thin command-line front end; all behavior lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmmtl::config::{load_config, RunConfig};
use dmmtl::error::Error;
use dmmtl::run;

#[derive(Parser)]
#[command(name = "dmmtl", version, about = "Multistage quality prediction: simulate, train, evaluate, tune, explain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. --set train.epochs=50 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset and write CSV + manifest + truth.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model; writes checkpoint, per-epoch log, and summary.
    Train {
        #[command(flatten)]
        common: Common,
        /// Resume from an existing checkpoint (epoch numbering continues).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint: per-output RMSE, quantiles, threshold sweep.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Randomized hyperparameter search scored by validation SSE.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Concurrent trials.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Importance reports: global always, local for --target.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target output as stage:output (0-based), e.g. 8:5.
        #[arg(long)]
        target: Option<String>,
        /// Restrict local averaging to these test-sample indices, e.g. 0,4,7.
        #[arg(long)]
        samples: Option<String>,
    },
}

fn parse_target(s: &str) -> Result<(usize, usize), Error> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Argument(format!("target '{s}' must look like stage:output")))?;
    let stage = a
        .parse()
        .map_err(|_| Error::Argument(format!("target stage '{a}' is not an integer")))?;
    let output = b
        .parse()
        .map_err(|_| Error::Argument(format!("target output '{b}' is not an integer")))?;
    Ok((stage, output))
}

fn parse_samples(s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::Argument(format!("sample id '{part}' is not an integer")))
        })
        .collect()
}

fn parse_sets(raw: &[String]) -> Result<Vec<(String, String)>, Error> {
    raw.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))
        })
        .collect()
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let sets = parse_sets(&common.set)?;
    load_config(&common.config, &sets, common.seed, common.out.clone())
}

fn dispatch(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Simulate { common } => run::cmd_simulate(&load(&common)?),
        Command::Train { common, checkpoint } => {
            run::cmd_train(&load(&common)?, checkpoint.as_deref())
        }
        Command::Evaluate { common, checkpoint } => {
            run::cmd_evaluate(&load(&common)?, &checkpoint)
        }
        Command::Tune { common, jobs } => run::cmd_tune(&load(&common)?, jobs),
        Command::Explain { common, checkpoint, target, samples } => {
            let target = target.as_deref().map(parse_target).transpose()?;
            let samples = samples.as_deref().map(parse_samples).transpose()?;
            run::cmd_explain(&load(&common)?, &checkpoint, target, samples.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
