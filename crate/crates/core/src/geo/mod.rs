//! WGS-84 to ECEF conversion and the evaluation metrics.

mod ecef;
mod metrics;
mod timing;

pub use ecef::{haversine_m, kmh_to_rates, rates_to_kmh, wgs84_to_ecef, EcefPoint, MEAN_EARTH_RADIUS, WGS84_A, WGS84_F};
pub use metrics::{
    deviation_m, mae, mae_in, mape, mape_in, mde, mde_in, rmse, rmse_in, HorizonMode, MetricRow,
    MetricTable, REPORTED,
};
pub use timing::{mtc, MIN_TIMED_WINDOWS, WARMUP_CALLS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("no samples")]
    Empty,
    #[error("{pred} predicted samples but {truth} true samples")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("horizon cutoff {h} outside 1..={available}")]
    Horizon { h: usize, available: usize },
    #[error("{got} windows given, at least {need} needed for timing")]
    TooFewWindows { got: usize, need: usize },
    #[error("predictor failed: {0}")]
    Predictor(String),
}
