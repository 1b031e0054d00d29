use serde::{Deserialize, Serialize};

use super::track::FlightTrack;
use super::DataError;

const SECONDS_PER_DAY: i64 = 86_400;

/// UTC calendar day index of an epoch timestamp.
pub fn day_of(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_DAY)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DaySplit {
    pub train: Vec<FlightTrack>,
    pub val: Vec<FlightTrack>,
    pub test: Vec<FlightTrack>,
    pub boundaries: SplitBoundaries,
}

/// Day indices (days since the epoch) of each part.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBoundaries {
    pub train_days: Vec<i64>,
    pub val_day: i64,
    pub test_day: i64,
}

/// Cuts tracks at UTC midnight so no piece spans two days.
pub fn cut_at_days(tracks: &[FlightTrack]) -> Vec<(i64, FlightTrack)> {
    let mut out = Vec::new();
    for t in tracks {
        let mut start = 0;
        for i in 1..=t.points.len() {
            let boundary = i == t.points.len() || day_of(t.points[i].timestamp) != day_of(t.points[start].timestamp);
            if boundary {
                out.push((
                    day_of(t.points[start].timestamp),
                    FlightTrack {
                        callsign: t.callsign.clone(),
                        points: t.points[start..i].to_vec(),
                    },
                ));
                start = i;
            }
        }
    }
    out
}

/// All days but the last two train, the penultimate validates, the last
/// tests. Tracks crossing midnight are cut so windows never straddle parts.
pub fn split_by_day(tracks: &[FlightTrack]) -> Result<DaySplit, DataError> {
    let pieces = cut_at_days(tracks);
    let mut days: Vec<i64> = pieces.iter().map(|(d, _)| *d).collect();
    days.sort_unstable();
    days.dedup();
    if days.len() < 3 {
        return Err(DataError::InsufficientDays { found: days.len() });
    }
    let test_day = days[days.len() - 1];
    let val_day = days[days.len() - 2];
    let mut split = DaySplit {
        boundaries: SplitBoundaries {
            train_days: days[..days.len() - 2].to_vec(),
            val_day,
            test_day,
        },
        ..Default::default()
    };
    for (day, track) in pieces {
        if day == test_day {
            split.test.push(track);
        } else if day == val_day {
            split.val.push(track);
        } else {
            split.train.push(track);
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::TrajectoryPoint;

    fn track(cs: &str, start: i64, len: usize) -> FlightTrack {
        FlightTrack {
            callsign: cs.into(),
            points: (0..len)
                .map(|i| TrajectoryPoint {
                    timestamp: start + 20 * i as i64,
                    callsign: cs.into(),
                    lon: 100.0,
                    lat: 30.0,
                    alt: 0.0,
                    vx: 0.0,
                    vy: 0.0,
                    vz: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn nine_days() {
        let tracks: Vec<_> = (0..9).map(|d| track("A", 1_613_692_800 + d * 86_400 + 3600, 30)).collect();
        let s = split_by_day(&tracks).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 1));
        assert_eq!(s.boundaries.train_days.len(), 7);
        assert_eq!(s.boundaries.test_day, day_of(1_613_692_800) + 8);
    }

    #[test]
    fn three_days_minimum() {
        let tracks: Vec<_> = (0..3).map(|d| track("A", d * 86_400, 5)).collect();
        let s = split_by_day(&tracks).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 1, 1));
        assert!(matches!(split_by_day(&tracks[..2]), Err(DataError::InsufficientDays { found: 2 })));
    }

    #[test]
    fn midnight_cut() {
        let t = track("N", 86_400 - 100, 10);
        let pieces = cut_at_days(&[t]);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].1.len(), 5);
        assert_eq!(pieces[1].0, 1);
    }
}
