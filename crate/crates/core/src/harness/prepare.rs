use std::collections::BTreeMap;
use std::path::Path;

use super::config::RunConfig;
use super::dataset::{dataset_files, load_dataset};
use super::{create_file, HarnessError};
use crate::data::{day_of, phase_counts, synth_generate, write_tracks, DayFile, FlightTrack, Manifest};

/// Generates the synthetic dataset: one CSV per day plus `manifest.json`.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Manifest, HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let tracks = synth_generate(&cfg.synth)?;
    let first_day = day_of(cfg.synth.start_epoch);
    let mut by_day: BTreeMap<i64, Vec<FlightTrack>> = BTreeMap::new();
    for t in tracks.into_iter().filter(|t| !t.is_empty()) {
        by_day.entry(day_of(t.points[0].timestamp)).or_default().push(t);
    }
    let mut manifest = Manifest::default();
    for (day, tracks) in &by_day {
        let file = format!("day_{:02}.csv", day - first_day);
        let points: usize = tracks.iter().map(|t| t.len()).sum();
        write_tracks(create_file(&out.join(&file))?, tracks)?;
        manifest.flights += tracks.len();
        manifest.points += points;
        manifest.files.push(DayFile {
            day: *day,
            file,
            flights: tracks.len(),
            points,
        });
    }
    manifest.write(&out.join("manifest.json"))?;
    log::info!("{} flights, {} points in {} files", manifest.flights, manifest.points, manifest.files.len());
    Ok(manifest)
}

/// Loads, splits and windows the dataset and records the outcome in
/// `prepared.json`.
pub fn cmd_prepare(cfg: &RunConfig, out: &Path) -> Result<Manifest, HarnessError> {
    let ds = load_dataset(cfg)?;
    let parts = [
        ("train", &ds.split.train, &ds.train),
        ("val", &ds.split.val, &ds.val),
        ("test", &ds.split.test, &ds.test),
    ];
    let mut manifest = Manifest {
        split: Some(ds.split.boundaries.clone()),
        dropped_short: ds.dropped_short,
        ..Default::default()
    };
    let source = cfg.paths.data_dir.join("manifest.json");
    manifest.files = if source.exists() {
        Manifest::read(&source)?.files
    } else {
        dataset_files(&cfg.paths.data_dir)?
            .iter()
            .map(|f| DayFile {
                file: f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                ..Default::default()
            })
            .collect()
    };
    for ((name, tracks, windows), stats) in parts.into_iter().zip(ds.stats) {
        manifest.flights += tracks.len();
        manifest.points += tracks.iter().map(|t| t.len()).sum::<usize>();
        manifest.windows.push((name.to_string(), stats));
        manifest.phases.push((name.to_string(), phase_counts(windows)));
    }
    manifest.write(&out.join("prepared.json"))?;
    Ok(manifest)
}
