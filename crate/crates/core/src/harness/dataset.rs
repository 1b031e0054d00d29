use std::path::{Path, PathBuf};

use super::config::{RunConfig, SplitName};
use super::HarnessError;
use crate::data::{
    load_csv, make_all_windows, split_by_day, DaySplit, FlightTrack, Manifest, WindowSample, WindowStats,
};
use crate::model::EncodedWindow;

/// Day split plus its windows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: DaySplit,
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub stats: [WindowStats; 3],
    pub dropped_short: usize,
}

impl Dataset {
    pub fn windows(&self, split: SplitName) -> &[WindowSample] {
        match split {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }
}

/// CSV files of a dataset directory: those listed in its manifest, or every
/// `*.csv` in name order.
pub fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let manifest = dir.join("manifest.json");
    if manifest.exists() {
        let m = Manifest::read(&manifest)?;
        return Ok(m.files.iter().map(|f| dir.join(&f.file)).collect());
    }
    let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_tracks(dir: &Path, min_len: usize) -> Result<(Vec<FlightTrack>, usize), HarnessError> {
    let mut tracks = Vec::new();
    let mut dropped = 0;
    for file in dataset_files(dir)? {
        let report = load_csv(&file, min_len)?;
        log::debug!("{}: {} rows, {} tracks", file.display(), report.rows, report.tracks.len());
        tracks.extend(report.tracks);
        dropped += report.dropped_short;
    }
    Ok((tracks, dropped))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset, HarnessError> {
    let (k, n) = (cfg.model.k, cfg.model.n);
    let (tracks, dropped_short) = load_tracks(&cfg.paths.data_dir, k + n)?;
    let split = split_by_day(&tracks)?;
    let window = |t: &[FlightTrack]| {
        make_all_windows(t, k, n, cfg.train.stride, &cfg.quantization, &cfg.widths)
    };
    let (train, s_train) = window(&split.train);
    let (val, s_val) = window(&split.val);
    let (test, s_test) = window(&split.test);
    log::info!(
        "windows: train {}, val {}, test {} ({} short tracks dropped)",
        train.len(),
        val.len(),
        test.len(),
        dropped_short
    );
    Ok(Dataset {
        split,
        train,
        val,
        test,
        stats: [s_train, s_val, s_test],
        dropped_short,
    })
}

/// At most `limit` items, evenly spaced and in order.
pub fn evenly<T: Clone>(items: &[T], limit: Option<usize>) -> Vec<T> {
    match limit {
        Some(m) if m < items.len() => (0..m).map(|i| items[i * items.len() / m].clone()).collect(),
        _ => items.to_vec(),
    }
}

pub fn encode_windows(cfg: &RunConfig, windows: &[WindowSample]) -> Result<Vec<EncodedWindow>, HarnessError> {
    windows
        .iter()
        .map(|w| {
            EncodedWindow::encode(
                &w.observations,
                &w.targets,
                &cfg.quantization,
                &cfg.widths,
                cfg.model.representation,
            )
            .map_err(HarnessError::from)
        })
        .collect()
}
