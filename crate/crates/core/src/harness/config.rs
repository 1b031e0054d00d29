use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::baselines::KalmanConfig;
use crate::codec::{BitWidthSpec, QuantizationSpec};
use crate::data::SynthConfig;
use crate::model::{ModelConfig, PredictMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// dataset directory written by `synth`, read by every other command
    pub data_dir: PathBuf,
    /// run directory for checkpoints, logs and reports
    pub out_dir: PathBuf,
    /// checkpoint for eval, predict and bench; defaults to `<out_dir>/best.ckpt`
    pub checkpoint: Option<PathBuf>,
    /// checkpoint to continue training from
    pub resume: Option<PathBuf>,
    /// observation CSV for `predict`
    pub input: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            out_dir: "runs/default".into(),
            checkpoint: None,
            resume: None,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    /// steps between validation passes
    pub eval_interval: u64,
    /// window stride within each flight
    pub stride: usize,
    /// keep only this many training windows, evenly spaced
    pub max_train_windows: Option<usize>,
    /// validation windows per pass, evenly spaced
    pub val_windows: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 32,
            lr: 1e-4,
            eval_interval: 200,
            stride: 1,
            max_train_windows: None,
            val_windows: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    #[default]
    Test,
}

impl SplitName {
    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split: SplitName,
    pub cutoffs: Vec<usize>,
    /// also report each horizon on its own
    pub instantaneous: bool,
    pub autoregressive: bool,
    pub kalman: bool,
    /// evaluate at most this many windows, evenly spaced
    pub max_windows: Option<usize>,
    /// dump pooled trajectory embeddings of every evaluated window
    pub embeddings: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split: SplitName::Test,
            cutoffs: vec![1, 3, 9, 15],
            instantaneous: false,
            autoregressive: true,
            kalman: true,
            max_windows: None,
            embeddings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub windows: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { windows: 100 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub mode: PredictMode,
}

/// Everything a run needs. Missing keys take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// seeds batch sampling; `--seed` also overrides the model and generator seeds
    pub seed: u64,
    pub deterministic: bool,
    pub paths: Paths,
    pub model: ModelConfig,
    pub quantization: QuantizationSpec,
    pub widths: BitWidthSpec,
    pub synth: SynthConfig,
    pub kalman: KalmanConfig,
    pub train: TrainSchedule,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
    pub predict: PredictConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.model.seed = seed;
        self.synth.seed = seed;
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model.validate()?;
        self.quantization.validate()?;
        self.widths.validate()?;
        self.kalman.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.synth.validate()?;
        let t = &self.train;
        if t.batch_size == 0 || t.eval_interval == 0 || t.stride == 0 {
            return Err(HarnessError::Config(
                "batch_size, eval_interval and stride must be positive".into(),
            ));
        }
        if !(t.lr.is_finite() && t.lr >= 0.0) {
            return Err(HarnessError::Config(format!("invalid learning rate {}", t.lr)));
        }
        if self.eval.cutoffs.iter().any(|&h| h == 0) {
            return Err(HarnessError::Config("cutoffs start at 1".into()));
        }
        Ok(())
    }

    /// Writes the resolved config as `config.toml` into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("best.ckpt"))
    }
}
