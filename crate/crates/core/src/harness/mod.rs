//! Command orchestration behind the `trajcast` binary: configuration,
//! dataset generation and preparation, training, evaluation, prediction and
//! latency benchmarks.

mod config;
mod dataset;
mod eval;
mod prepare;
mod train;

pub use config::{BenchConfig, EvalConfig, Paths, PredictConfig, RunConfig, SplitName, TrainSchedule};
pub use dataset::{dataset_files, encode_windows, evenly, load_dataset, load_tracks, Dataset};
pub use eval::{cmd_bench, cmd_eval, cmd_predict, load_model, BenchEntry, BenchReport, EvalReport};
pub use prepare::{cmd_prepare, cmd_synth};
pub use train::{cmd_train, TrainSummary};

use std::path::Path;

use thiserror::Error;

use crate::baselines::BaselineError;
use crate::codec::CodecError;
use crate::data::DataError;
use crate::geo::GeoError;
use crate::model::ModelError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{got} observations for {callsign}, at least {need} needed")]
    InsufficientObservations { callsign: String, got: usize, need: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

fn model_code(e: &ModelError) -> i32 {
    match e {
        ModelError::Config(_) | ModelError::Checkpoint(_) | ModelError::HorizonOutOfRange { .. } => EXIT_CONFIG,
        ModelError::NonFinite(_) | ModelError::NonFiniteGradient { .. } => EXIT_NUMERICAL,
        ModelError::Io(_) => EXIT_IO,
        ModelError::ShapeMismatch { .. } | ModelError::EmptyBatch | ModelError::Codec(_) => EXIT_DATA,
    }
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 configuration, 3 data, 4 numerical, 5 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::InsufficientObservations { .. } | HarnessError::Codec(_) => EXIT_DATA,
            HarnessError::Io { .. } => EXIT_IO,
            HarnessError::Data(DataError::Io { .. }) => EXIT_IO,
            HarnessError::Data(DataError::Config(_)) => EXIT_CONFIG,
            HarnessError::Data(_) => EXIT_DATA,
            HarnessError::Model(e) => model_code(e),
            HarnessError::Baseline(BaselineError::SingularInnovation) => EXIT_NUMERICAL,
            HarnessError::Baseline(BaselineError::Config(_)) => EXIT_CONFIG,
            HarnessError::Baseline(BaselineError::TooShort { .. }) => EXIT_DATA,
            HarnessError::Baseline(BaselineError::Model(e)) => model_code(e),
            HarnessError::Geo(_) => EXIT_DATA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Prepare,
    Train,
    Eval,
    Predict,
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Prepare => "prepare",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Predict => "predict",
            Command::Bench => "bench",
        }
    }

    /// Directory the command writes to.
    pub fn output_dir(self, cfg: &RunConfig) -> &Path {
        match self {
            Command::Synth => &cfg.paths.data_dir,
            _ => &cfg.paths.out_dir,
        }
    }
}

/// Validates `cfg`, echoes it into the output directory and runs `command`.
pub fn run(command: Command, cfg: &RunConfig) -> Result<(), HarnessError> {
    cfg.validate()?;
    let out = command.output_dir(cfg);
    cfg.echo(out)?;
    match command {
        Command::Synth => cmd_synth(cfg, out).map(|_| ()),
        Command::Prepare => cmd_prepare(cfg, out).map(|_| ()),
        Command::Train => cmd_train(cfg, out).map(|_| ()),
        Command::Eval => cmd_eval(cfg, out).map(|_| ()),
        Command::Predict => {
            let input = cfg
                .paths
                .input
                .as_deref()
                .ok_or_else(|| HarnessError::Config("predict needs an input CSV".into()))?;
            cmd_predict(cfg, input, out).map(|_| ())
        }
        Command::Bench => cmd_bench(cfg, out).map(|_| ()),
    }
}

pub(crate) fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, HarnessError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
