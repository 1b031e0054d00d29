use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::codec::{TrajectoryPoint, STEP_SECONDS};

/// Column names of the trajectory CSV schema, in order.
pub const CSV_COLUMNS: [&str; 8] = ["timestamp", "callsign", "lon", "lat", "alt_m", "vx_kmh", "vy_kmh", "vz_kmh"];

/// Time-ordered points of one flight at exact 20 s spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightTrack {
    pub callsign: String,
    pub points: Vec<TrajectoryPoint>,
}

impl FlightTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Identifier unique within a dataset: callsign and first timestamp.
    pub fn id(&self) -> String {
        let start = self.points.first().map_or(0, |p| p.timestamp);
        format!("{}@{}", self.callsign, start)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub tracks: Vec<FlightTrack>,
    pub rows: usize,
    /// tracks (after gap splitting) shorter than the minimum length
    pub dropped_short: usize,
}

fn parse_field<T: std::str::FromStr>(value: &str, column: &str, line: u64) -> Result<T, DataError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| DataError::Parse {
        line,
        message: format!("{column}: {e} ({value:?})"),
    })
}

/// Splits sorted points wherever consecutive timestamps are not 20 s apart.
pub fn split_at_gaps(callsign: &str, points: Vec<TrajectoryPoint>) -> Vec<FlightTrack> {
    let mut out = Vec::new();
    let mut current: Vec<TrajectoryPoint> = Vec::new();
    for p in points {
        if let Some(last) = current.last() {
            if p.timestamp - last.timestamp != STEP_SECONDS {
                out.push(FlightTrack {
                    callsign: callsign.to_string(),
                    points: std::mem::take(&mut current),
                });
            }
        }
        current.push(p);
    }
    if !current.is_empty() {
        out.push(FlightTrack {
            callsign: callsign.to_string(),
            points: current,
        });
    }
    out
}

/// Parses trajectory CSV, groups rows by callsign, orders them by time and
/// splits tracks at gaps. Tracks shorter than `min_len` are dropped.
pub fn read_tracks<R: Read>(input: R, min_len: usize) -> Result<LoadReport, DataError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut index = [0usize; 8];
    let mut missing = Vec::new();
    for (slot, col) in index.iter_mut().zip(CSV_COLUMNS) {
        match headers.iter().position(|h| h == col) {
            Some(i) => *slot = i,
            None => missing.push(col.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(DataError::Schema { missing });
    }

    let mut groups: BTreeMap<String, Vec<(u64, TrajectoryPoint)>> = BTreeMap::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(index[i]).unwrap_or("");
        let callsign = field(1).to_string();
        if callsign.is_empty() {
            return Err(DataError::Parse {
                line,
                message: "empty callsign".into(),
            });
        }
        let point = TrajectoryPoint {
            timestamp: parse_field(field(0), CSV_COLUMNS[0], line)?,
            callsign: callsign.clone(),
            lon: parse_field(field(2), CSV_COLUMNS[2], line)?,
            lat: parse_field(field(3), CSV_COLUMNS[3], line)?,
            alt: parse_field(field(4), CSV_COLUMNS[4], line)?,
            vx: parse_field(field(5), CSV_COLUMNS[5], line)?,
            vy: parse_field(field(6), CSV_COLUMNS[6], line)?,
            vz: parse_field(field(7), CSV_COLUMNS[7], line)?,
        };
        if let Some(attr) = crate::codec::Attribute::ALL.into_iter().find(|&a| !point.get(a).is_finite()) {
            return Err(DataError::Parse {
                line,
                message: format!("{attr} is not finite"),
            });
        }
        groups.entry(callsign).or_default().push((line, point));
        rows += 1;
    }

    let mut report = LoadReport {
        rows,
        ..Default::default()
    };
    for (callsign, mut points) in groups {
        points.sort_by_key(|(_, p)| p.timestamp);
        for pair in points.windows(2) {
            if pair[0].1.timestamp == pair[1].1.timestamp {
                let line = pair[0].0.max(pair[1].0);
                return Err(DataError::Parse {
                    line,
                    message: format!("duplicate row for {callsign} at {}", pair[1].1.timestamp),
                });
            }
        }
        for track in split_at_gaps(&callsign, points.into_iter().map(|(_, p)| p).collect()) {
            if track.len() < min_len {
                report.dropped_short += 1;
            } else {
                report.tracks.push(track);
            }
        }
    }
    Ok(report)
}

pub fn load_csv(path: &Path, min_len: usize) -> Result<LoadReport, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_tracks(std::io::BufReader::new(file), min_len)
}

/// Writes points in the documented schema; values are printed in their
/// shortest exact decimal form.
pub fn write_points<'a, W: Write>(out: W, points: impl IntoIterator<Item = &'a TrajectoryPoint>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for p in points {
        w.write_record([
            p.timestamp.to_string(),
            p.callsign.clone(),
            p.lon.to_string(),
            p.lat.to_string(),
            p.alt.to_string(),
            p.vx.to_string(),
            p.vy.to_string(),
            p.vz.to_string(),
        ])?;
    }
    w.flush().map_err(|e| DataError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_tracks<W: Write>(out: W, tracks: &[FlightTrack]) -> Result<(), DataError> {
    write_points(out, tracks.iter().flat_map(|t| &t.points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ts: i64, cs: &str) -> String {
        format!("{ts},{cs},100.0,30.0,9000,700,0,0\n")
    }

    fn csv_of(rows: &[String]) -> String {
        let mut s = CSV_COLUMNS.join(",") + "\n";
        for r in rows {
            s.push_str(r);
        }
        s
    }

    #[test]
    fn uniform_track() {
        let rows: Vec<_> = (0..24).map(|i| row(1000 + 20 * i, "A")).collect();
        let r = read_tracks(csv_of(&rows).as_bytes(), 24).unwrap();
        assert_eq!(r.tracks.len(), 1);
        assert_eq!(r.tracks[0].len(), 24);
    }

    #[test]
    fn gap_splits_and_order_is_restored() {
        let mut rows: Vec<_> = (0..10).map(|i| row(1000 + 20 * i, "A")).collect();
        rows.extend((0..10).map(|i| row(1220 + 20 * i, "A")));
        rows.reverse();
        let r = read_tracks(csv_of(&rows).as_bytes(), 1).unwrap();
        assert_eq!(r.tracks.len(), 2);
        assert_eq!(r.tracks[0].points[0].timestamp, 1000);
        assert_eq!(r.tracks[1].points[0].timestamp, 1220);
        let r = read_tracks(csv_of(&rows).as_bytes(), 11).unwrap();
        assert_eq!((r.tracks.len(), r.dropped_short), (0, 2));
    }

    #[test]
    fn duplicates_and_bad_rows() {
        let rows = vec![row(1000, "A"), row(1020, "A"), row(1000, "A")];
        match read_tracks(csv_of(&rows).as_bytes(), 1) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let bad = csv_of(&[row(1000, "A"), "1020,A,abc,30,9000,700,0,0\n".into()]);
        match read_tracks(bad.as_bytes(), 1) {
            Err(DataError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("lon"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_lists_missing_columns() {
        let s = "timestamp,callsign,lon,lat\n";
        match read_tracks(s.as_bytes(), 1) {
            Err(DataError::Schema { missing }) => assert_eq!(missing, ["alt_m", "vx_kmh", "vy_kmh", "vz_kmh"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_then_read() {
        let rows: Vec<_> = (0..5).map(|i| row(1000 + 20 * i, "B")).collect();
        let r = read_tracks(csv_of(&rows).as_bytes(), 1).unwrap();
        let mut buf = Vec::new();
        write_tracks(&mut buf, &r.tracks).unwrap();
        let back = read_tracks(buf.as_slice(), 1).unwrap();
        assert_eq!(back.tracks, r.tracks);
    }
}
