use std::hint::black_box;
use std::time::Instant;

use super::GeoError;

/// Calls discarded before timing starts.
pub const WARMUP_CALLS: usize = 5;
/// Minimum number of timed windows.
pub const MIN_TIMED_WINDOWS: usize = 30;

/// Mean wall-clock milliseconds of `predict` per window, one window per
/// call. The first [`WARMUP_CALLS`] calls (cycling over `windows`) are
/// discarded; every window is then timed once.
pub fn mtc<W, R, E>(windows: &[W], mut predict: impl FnMut(&W) -> Result<R, E>) -> Result<f64, GeoError>
where
    E: std::fmt::Display,
{
    if windows.len() < MIN_TIMED_WINDOWS {
        return Err(GeoError::TooFewWindows {
            got: windows.len(),
            need: MIN_TIMED_WINDOWS,
        });
    }
    let fail = |e: E| GeoError::Predictor(e.to_string());
    for w in windows.iter().cycle().take(WARMUP_CALLS) {
        black_box(predict(w).map_err(fail)?);
    }
    let start = Instant::now();
    for w in windows {
        black_box(predict(w).map_err(fail)?);
    }
    Ok(start.elapsed().as_secs_f64() * 1000.0 / windows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_rejects() {
        let windows: Vec<u32> = (0..40).collect();
        let mut calls = 0;
        let ms = mtc(&windows, |_| {
            calls += 1;
            Ok::<_, String>(())
        })
        .unwrap();
        assert!(ms >= 0.0);
        assert_eq!(calls, 45);
        assert!(matches!(
            mtc(&windows[..10], |_| Ok::<_, String>(())),
            Err(GeoError::TooFewWindows { got: 10, .. })
        ));
        assert!(mtc(&windows, |_| Err::<(), _>("boom")).is_err());
    }
}
