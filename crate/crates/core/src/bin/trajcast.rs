use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trajcast::harness::{run, Command, RunConfig, SplitName};
use trajcast::model::PredictMode;

#[derive(Parser)]
#[command(name = "trajcast", version, about = "Multi-horizon flight trajectory prediction")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// single-threaded, seeded, no wall-clock values in outputs
    #[arg(long, global = true)]
    deterministic: bool,
    /// overrides the run, model and generator seeds
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory (the dataset directory for `synth`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// dataset directory
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// checkpoint to evaluate, predict or benchmark with
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Direct,
    Autoregressive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic dataset
    Synth,
    /// Split and window the dataset and write its manifest
    Prepare,
    /// Train the network
    Train {
        /// continue from this checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
        /// total steps, counting those already in a resumed checkpoint
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Metric tables on a split
    Eval {
        /// defaults to test
        #[arg(long, value_enum)]
        split: Option<Split>,
        /// also report each horizon on its own
        #[arg(long)]
        instantaneous: bool,
        /// dump pooled trajectory embeddings
        #[arg(long)]
        embeddings: bool,
    },
    /// Predict from an observation CSV
    Predict {
        /// trajectory CSV; the last k points of each track are used
        #[arg(long)]
        input: PathBuf,
        /// defaults to direct
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Mean time cost per window at batch size one
    Bench,
}

fn resolve(cli: Cli) -> Result<(Command, RunConfig), trajcast::harness::HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.deterministic |= cli.deterministic;
    if let Some(d) = cli.data {
        cfg.paths.data_dir = d;
    }
    if let Some(c) = cli.checkpoint {
        cfg.paths.checkpoint = Some(c);
    }
    let command = match cli.command {
        Cmd::Synth => Command::Synth,
        Cmd::Prepare => Command::Prepare,
        Cmd::Train { resume, steps } => {
            if resume.is_some() {
                cfg.paths.resume = resume;
            }
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            Command::Train
        }
        Cmd::Eval {
            split,
            instantaneous,
            embeddings,
        } => {
            if let Some(s) = split {
                cfg.eval.split = match s {
                    Split::Train => SplitName::Train,
                    Split::Val => SplitName::Val,
                    Split::Test => SplitName::Test,
                };
            }
            cfg.eval.instantaneous |= instantaneous;
            cfg.eval.embeddings |= embeddings;
            Command::Eval
        }
        Cmd::Predict { input, mode } => {
            cfg.paths.input = Some(input);
            if let Some(m) = mode {
                cfg.predict.mode = match m {
                    Mode::Direct => PredictMode::Direct,
                    Mode::Autoregressive => PredictMode::Autoregressive,
                };
            }
            Command::Predict
        }
        Cmd::Bench => Command::Bench,
    };
    if let Some(out) = cli.out {
        match command {
            Command::Synth => cfg.paths.data_dir = out,
            _ => cfg.paths.out_dir = out,
        }
    }
    Ok((command, cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = resolve(Cli::parse()).and_then(|(command, cfg)| {
        log::info!("{} -> {}", command.name(), command.output_dir(&cfg).display());
        run(command, &cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
