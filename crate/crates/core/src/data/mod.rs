//! Trajectory ingestion, windowing, day splits and synthetic flights.

mod manifest;
mod split;
mod synth;
mod track;
mod window;

pub use manifest::{DayFile, Manifest};
pub use split::{cut_at_days, day_of, split_by_day, DaySplit, SplitBoundaries};
pub use synth::{synth_flight, synth_generate, SynthConfig};
pub use track::{load_csv, read_tracks, split_at_gaps, write_points, write_tracks, FlightTrack, LoadReport, CSV_COLUMNS};
pub use window::{
    make_all_windows, make_windows, phase_counts, phase_tag, PhaseTag, WindowSample, WindowStats,
    TURN_THRESHOLD_DEG, VERTICAL_THRESHOLD_KMH,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing columns: {}", missing.join(", "))]
    Schema { missing: Vec<String> },
    #[error("{found} distinct days found, at least 3 needed")]
    InsufficientDays { found: usize },
    #[error("invalid data configuration: {0}")]
    Config(String),
    #[error("{0} split has no windows")]
    EmptySplit(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
