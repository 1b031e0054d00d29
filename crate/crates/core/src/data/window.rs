use serde::{Deserialize, Serialize};

use super::track::FlightTrack;
use crate::codec::{
    diff_sequence, quantize_point, BitWidthSpec, CodecError, DifferentialCode, QuantizationSpec,
    TrajectoryPoint,
};

/// Vertical speed above which a point counts as climbing or descending, km/h.
pub const VERTICAL_THRESHOLD_KMH: f64 = 2.0;
/// Heading change per step above which a point counts as turning, degrees.
pub const TURN_THRESHOLD_DEG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseTag {
    Climb,
    Cruise,
    Turn,
    Descend,
    Mixed,
}

impl PhaseTag {
    pub fn name(self) -> &'static str {
        match self {
            PhaseTag::Climb => "climb",
            PhaseTag::Cruise => "cruise",
            PhaseTag::Turn => "turn",
            PhaseTag::Descend => "descend",
            PhaseTag::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub flight: String,
    pub start: i64,
    pub observations: Vec<TrajectoryPoint>,
    pub targets: Vec<TrajectoryPoint>,
    pub phase: PhaseTag,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowStats {
    pub candidates: usize,
    pub kept: usize,
    /// a step does not fit its signed differential field
    pub rejected_delta: usize,
    /// a point falls outside the quantization envelope
    pub rejected_range: usize,
}

impl WindowStats {
    pub fn add(&mut self, other: &WindowStats) {
        self.candidates += other.candidates;
        self.kept += other.kept;
        self.rejected_delta += other.rejected_delta;
        self.rejected_range += other.rejected_range;
    }
}

/// Heading in degrees clockwise from north.
fn heading(p: &TrajectoryPoint) -> f64 {
    p.vx.atan2(p.vy).to_degrees()
}

fn heading_change(a: &TrajectoryPoint, b: &TrajectoryPoint) -> f64 {
    let d = (heading(b) - heading(a)).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn point_phase(points: &[TrajectoryPoint], i: usize) -> PhaseTag {
    let p = &points[i];
    if p.vz > VERTICAL_THRESHOLD_KMH {
        return PhaseTag::Climb;
    }
    if p.vz < -VERTICAL_THRESHOLD_KMH {
        return PhaseTag::Descend;
    }
    let turn = match (i.checked_sub(1), points.get(i + 1)) {
        (Some(prev), _) => heading_change(&points[prev], p),
        (None, Some(next)) => heading_change(p, next),
        (None, None) => 0.0,
    };
    if turn > TURN_THRESHOLD_DEG {
        PhaseTag::Turn
    } else {
        PhaseTag::Cruise
    }
}

/// The shared phase of every point, or `Mixed`.
pub fn phase_tag(points: &[TrajectoryPoint]) -> PhaseTag {
    let mut tags = (0..points.len()).map(|i| point_phase(points, i));
    let first = match tags.next() {
        Some(t) => t,
        None => return PhaseTag::Mixed,
    };
    if tags.all(|t| t == first) {
        first
    } else {
        PhaseTag::Mixed
    }
}

enum Check {
    Ok,
    Range,
    Delta,
}

fn encodable(points: &[TrajectoryPoint], q: &QuantizationSpec, w: &BitWidthSpec) -> Check {
    let quantized: Result<Vec<_>, _> = points.iter().map(|p| quantize_point(p, q, w)).collect();
    let quantized = match quantized {
        Ok(v) => v,
        Err(_) => return Check::Range,
    };
    let deltas = diff_sequence(&quantized).expect("window longer than one point");
    match deltas.iter().try_for_each(|d| DifferentialCode::encode(d, w).map(|_| ())) {
        Ok(()) => Check::Ok,
        Err(CodecError::DeltaOverflow { .. }) => Check::Delta,
        Err(_) => Check::Range,
    }
}

/// Sliding windows of `k + n` points with the given stride. Windows whose
/// points leave the quantization envelope or whose steps overflow the
/// differential fields are dropped and counted.
pub fn make_windows(
    track: &FlightTrack,
    k: usize,
    n: usize,
    stride: usize,
    q: &QuantizationSpec,
    w: &BitWidthSpec,
) -> (Vec<WindowSample>, WindowStats) {
    let mut stats = WindowStats::default();
    let mut out = Vec::new();
    let len = k + n;
    if k == 0 || n == 0 || stride == 0 || track.len() < len {
        return (out, stats);
    }
    let id = track.id();
    for start in (0..=track.len() - len).step_by(stride) {
        stats.candidates += 1;
        let span = &track.points[start..start + len];
        match encodable(span, q, w) {
            Check::Ok => {}
            Check::Range => {
                stats.rejected_range += 1;
                continue;
            }
            Check::Delta => {
                stats.rejected_delta += 1;
                continue;
            }
        }
        stats.kept += 1;
        out.push(WindowSample {
            flight: id.clone(),
            start: span[0].timestamp,
            observations: span[..k].to_vec(),
            targets: span[k..].to_vec(),
            phase: phase_tag(span),
        });
    }
    if stats.rejected_delta + stats.rejected_range > 0 {
        log::debug!(
            "{id}: rejected {} windows (delta {}, range {})",
            stats.rejected_delta + stats.rejected_range,
            stats.rejected_delta,
            stats.rejected_range
        );
    }
    (out, stats)
}

/// Windows of every track, in track order.
pub fn make_all_windows(
    tracks: &[FlightTrack],
    k: usize,
    n: usize,
    stride: usize,
    q: &QuantizationSpec,
    w: &BitWidthSpec,
) -> (Vec<WindowSample>, WindowStats) {
    let mut all = Vec::new();
    let mut stats = WindowStats::default();
    for t in tracks {
        let (ws, s) = make_windows(t, k, n, stride, q, w);
        all.extend(ws);
        stats.add(&s);
    }
    (all, stats)
}

/// Tallies of windows per phase, in tag order.
pub fn phase_counts(windows: &[WindowSample]) -> Vec<(PhaseTag, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for w in windows {
        *counts.entry(w.phase).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}
