use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::{encode_windows, evenly, load_dataset};
use super::{create_file, write_text, HarnessError};
use crate::codec::TrajectoryPoint;
use crate::data::{DataError, WindowSample};
use crate::geo::mde;
use crate::model::{
    load_checkpoint, save_checkpoint, AdamConfig, Checkpoint, EncodedWindow, Model, PredictMode, Precision, Scalar,
    Trainer,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub first_step: u64,
    pub steps: u64,
    pub final_loss: Option<f64>,
    pub best_step: u64,
    pub best_val_loss: f64,
    pub best_val_mde_km: f64,
    pub train_windows: usize,
    pub val_windows: usize,
}

/// Batch indices for `step`; a pure function of seed and step so resumed
/// runs draw the same batches.
pub(crate) fn batch_indices(seed: u64, step: u64, windows: usize, batch: usize) -> Vec<usize> {
    if windows <= batch {
        return (0..windows).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rand::seq::index::sample(&mut rng, windows, batch).into_vec()
}

fn validate<T: Scalar>(
    trainer: &Trainer<T>,
    cfg: &RunConfig,
    encoded: &[EncodedWindow],
    windows: &[WindowSample],
) -> Result<(f64, f64), HarnessError> {
    let refs: Vec<&EncodedWindow> = encoded.iter().collect();
    let loss = trainer.loss(&refs)?;
    let model = Model::new(trainer.net.clone(), trainer.params.clone(), cfg.quantization);
    let n = cfg.model.n;
    let pred = windows
        .iter()
        .map(|w| model.predict(&w.observations, n, PredictMode::Direct))
        .collect::<Result<Vec<_>, _>>()?;
    let truth: Vec<Vec<TrajectoryPoint>> = windows.iter().map(|w| w.targets.clone()).collect();
    Ok((loss, mde(&pred, &truth, n)?))
}

fn train_with<T: Scalar>(cfg: &RunConfig, out: &Path) -> Result<TrainSummary, HarnessError> {
    let ds = load_dataset(cfg)?;
    let train = evenly(&ds.train, cfg.train.max_train_windows);
    let val = evenly(&ds.val, Some(cfg.train.val_windows));
    if train.is_empty() {
        return Err(DataError::EmptySplit("train").into());
    }
    if val.is_empty() {
        return Err(DataError::EmptySplit("val").into());
    }
    let train_enc = encode_windows(cfg, &train)?;
    let val_enc = encode_windows(cfg, &val)?;

    let adam = AdamConfig {
        lr: cfg.train.lr,
        ..AdamConfig::default()
    };
    let mut trainer = match &cfg.paths.resume {
        Some(path) => {
            let ckpt = load_checkpoint::<T>(path, Some(&cfg.model))?;
            if ckpt.quantization != cfg.quantization || ckpt.layout != cfg.widths {
                return Err(HarnessError::Config(
                    "checkpoint quantization or widths differ from the configuration".into(),
                ));
            }
            log::info!("resuming from {} at step {}", path.display(), ckpt.step);
            ckpt.into_trainer(adam)?
        }
        None => Trainer::new(&cfg.model, &cfg.widths, adam)?,
    };
    trainer.set_lr(cfg.train.lr);

    let first_step = trainer.step;
    let mut log_file = create_file(&out.join("train_log.csv"))?;
    let log_err = |e| HarnessError::io(&out.join("train_log.csv"), e);
    writeln!(log_file, "step,loss,val_loss,val_mde_km").map_err(log_err)?;

    let mut summary = TrainSummary {
        first_step,
        steps: first_step,
        final_loss: None,
        best_step: first_step,
        best_val_loss: f64::INFINITY,
        best_val_mde_km: f64::INFINITY,
        train_windows: train.len(),
        val_windows: val.len(),
    };
    let best_path = out.join("best.ckpt");
    let checkpoint_best = |trainer: &Trainer<T>, summary: &mut TrainSummary| -> Result<String, HarnessError> {
        let (val_loss, val_mde) = validate(trainer, cfg, &val_enc, &val)?;
        log::info!("step {}: val loss {val_loss:.6}, val MDE {val_mde:.4} km", trainer.step);
        if val_mde < summary.best_val_mde_km || !summary.best_val_mde_km.is_finite() {
            summary.best_val_mde_km = val_mde;
            summary.best_val_loss = val_loss;
            summary.best_step = trainer.step;
            save_checkpoint(&best_path, &Checkpoint::from_trainer(trainer, cfg.quantization))?;
        }
        Ok(format!("{val_loss},{val_mde}"))
    };

    let mut validated = false;
    for step in first_step..cfg.train.steps {
        let idx = batch_indices(cfg.seed, step, train_enc.len(), cfg.train.batch_size);
        let batch: Vec<&EncodedWindow> = idx.iter().map(|&i| &train_enc[i]).collect();
        let loss = trainer.train_step(&batch)?;
        summary.final_loss = Some(loss);
        let done = trainer.step;
        let val_cols = if done % cfg.train.eval_interval == 0 || done == cfg.train.steps {
            validated = done == cfg.train.steps;
            checkpoint_best(&trainer, &mut summary)?
        } else {
            ",".to_string()
        };
        writeln!(log_file, "{done},{loss},{val_cols}").map_err(log_err)?;
    }
    if !validated {
        let cols = checkpoint_best(&trainer, &mut summary)?;
        writeln!(log_file, "{},,{cols}", trainer.step).map_err(log_err)?;
    }
    log_file.flush().map_err(log_err)?;
    summary.steps = trainer.step;
    save_checkpoint(&out.join("last.ckpt"), &Checkpoint::from_trainer(&trainer, cfg.quantization))?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&out.join("train_summary.json"), &(json + "\n"))?;
    Ok(summary)
}

/// Trains up to `train.steps` total steps, writing `train_log.csv`,
/// `best.ckpt` (lowest validation MDE at the last horizon), `last.ckpt` and
/// `train_summary.json`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainSummary, HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    match cfg.model.precision {
        Precision::F64 => train_with::<f64>(cfg, out),
        Precision::F32 => train_with::<f32>(cfg, out),
    }
}
