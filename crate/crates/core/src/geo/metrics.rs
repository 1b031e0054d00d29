use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ecef::wgs84_to_ecef;
use super::GeoError;
use crate::codec::{Attribute, TrajectoryPoint};

/// Attributes reported by the per-attribute metrics.
pub const REPORTED: [Attribute; 3] = [Attribute::Lon, Attribute::Lat, Attribute::Alt];

/// Which horizons a cell covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonMode {
    /// every horizon `j <= h`
    #[default]
    Cumulative,
    /// only horizon `j == h`
    Instantaneous,
}

impl HorizonMode {
    fn range(self, h: usize) -> Range<usize> {
        match self {
            HorizonMode::Cumulative => 0..h,
            HorizonMode::Instantaneous => h - 1..h,
        }
    }
}

fn check<T>(pred: &[Vec<T>], truth: &[Vec<T>], h: usize) -> Result<(), GeoError> {
    if pred.is_empty() {
        return Err(GeoError::Empty);
    }
    if pred.len() != truth.len() {
        return Err(GeoError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if h == 0 {
        return Err(GeoError::Horizon { h, available: 0 });
    }
    for (p, t) in pred.iter().zip(truth) {
        let available = p.len().min(t.len());
        if h > available {
            return Err(GeoError::Horizon { h, available });
        }
    }
    Ok(())
}

/// Every `(pred, truth)` pair over samples and the horizons of `range`.
fn pairs<'a, T>(pred: &'a [Vec<T>], truth: &'a [Vec<T>], range: Range<usize>) -> impl Iterator<Item = (&'a T, &'a T)> {
    pred.iter()
        .zip(truth)
        .flat_map(move |(p, t)| p[range.clone()].iter().zip(&t[range.clone()]))
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Mean absolute error over samples and horizons `j <= h`.
/// Values are indexed `[sample][horizon]`.
pub fn mae(pred: &[Vec<f64>], truth: &[Vec<f64>], h: usize) -> Result<f64, GeoError> {
    mae_in(pred, truth, h, HorizonMode::Cumulative)
}

pub fn mae_in(pred: &[Vec<f64>], truth: &[Vec<f64>], h: usize, mode: HorizonMode) -> Result<f64, GeoError> {
    check(pred, truth, h)?;
    Ok(mean(pairs(pred, truth, mode.range(h)).map(|(p, t)| (p - t).abs())).expect("nonempty"))
}

/// Mean absolute percentage error in percent. Pairs with a zero true value
/// are skipped; `None` when no pair remains.
pub fn mape(pred: &[Vec<f64>], truth: &[Vec<f64>], h: usize) -> Result<Option<f64>, GeoError> {
    mape_in(pred, truth, h, HorizonMode::Cumulative)
}

pub fn mape_in(pred: &[Vec<f64>], truth: &[Vec<f64>], h: usize, mode: HorizonMode) -> Result<Option<f64>, GeoError> {
    check(pred, truth, h)?;
    Ok(mean(
        pairs(pred, truth, mode.range(h))
            .filter(|(_, &t)| t != 0.0)
            .map(|(p, t)| ((p - t) / t).abs()),
    )
    .map(|m| m * 100.0))
}

/// Root mean squared error over samples and horizons `j <= h`.
pub fn rmse(pred: &[Vec<f64>], truth: &[Vec<f64>], h: usize) -> Result<f64, GeoError> {
    rmse_in(pred, truth, h, HorizonMode::Cumulative)
}

pub fn rmse_in(pred: &[Vec<f64>], truth: &[Vec<f64>], h: usize, mode: HorizonMode) -> Result<f64, GeoError> {
    check(pred, truth, h)?;
    Ok(mean(pairs(pred, truth, mode.range(h)).map(|(p, t)| (p - t) * (p - t)))
        .expect("nonempty")
        .sqrt())
}

/// ECEF distance between two points, meters.
pub fn deviation_m(a: &TrajectoryPoint, b: &TrajectoryPoint) -> f64 {
    wgs84_to_ecef(a.lon, a.lat, a.alt).distance(&wgs84_to_ecef(b.lon, b.lat, b.alt))
}

/// Mean deviation error in kilometers over samples and horizons `j <= h`.
pub fn mde(pred: &[Vec<TrajectoryPoint>], truth: &[Vec<TrajectoryPoint>], h: usize) -> Result<f64, GeoError> {
    mde_in(pred, truth, h, HorizonMode::Cumulative)
}

pub fn mde_in(
    pred: &[Vec<TrajectoryPoint>],
    truth: &[Vec<TrajectoryPoint>],
    h: usize,
    mode: HorizonMode,
) -> Result<f64, GeoError> {
    check(pred, truth, h)?;
    Ok(mean(pairs(pred, truth, mode.range(h)).map(|(p, t)| deviation_m(p, t))).expect("nonempty") / 1000.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub horizon: usize,
    /// lon, lat, alt
    pub mae: [f64; 3],
    /// percent; `None` when every true value was zero
    pub mape: [Option<f64>; 3],
    pub rmse: [f64; 3],
    pub mde_km: f64,
}

/// Metrics of one predictor at a set of horizon cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub predictor: String,
    pub mode: HorizonMode,
    pub samples: usize,
    pub rows: Vec<MetricRow>,
    pub mtc_ms: Option<f64>,
}

fn column(points: &[Vec<TrajectoryPoint>], attr: Attribute) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|s| s.iter().map(|p| p.get(attr)).collect())
        .collect()
}

impl MetricTable {
    pub fn compute(
        predictor: &str,
        pred: &[Vec<TrajectoryPoint>],
        truth: &[Vec<TrajectoryPoint>],
        cutoffs: &[usize],
        mode: HorizonMode,
    ) -> Result<Self, GeoError> {
        let cols: Vec<_> = REPORTED.iter().map(|&a| (column(pred, a), column(truth, a))).collect();
        let rows = cutoffs
            .iter()
            .map(|&h| {
                let mut row = MetricRow {
                    horizon: h,
                    mae: [0.0; 3],
                    mape: [None; 3],
                    rmse: [0.0; 3],
                    mde_km: mde_in(pred, truth, h, mode)?,
                };
                for (i, (p, t)) in cols.iter().enumerate() {
                    row.mae[i] = mae_in(p, t, h, mode)?;
                    row.mape[i] = mape_in(p, t, h, mode)?;
                    row.rmse[i] = rmse_in(p, t, h, mode)?;
                }
                Ok(row)
            })
            .collect::<Result<_, GeoError>>()?;
        Ok(Self {
            predictor: predictor.to_string(),
            mode,
            samples: pred.len(),
            rows,
            mtc_ms: None,
        })
    }

    pub fn row(&self, horizon: usize) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.horizon == horizon)
    }

    /// One line per cutoff; columns `metric_attribute`, then MDE and MTC.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["predictor".to_string(), "mode".to_string(), "horizon".to_string()];
        for metric in ["mae", "mape", "rmse"] {
            for a in REPORTED {
                header.push(format!("{metric}_{a}"));
            }
        }
        header.extend(["mde_km".to_string(), "mtc_ms".to_string()]);
        w.write_record(&header)?;
        let mode = match self.mode {
            HorizonMode::Cumulative => "cumulative",
            HorizonMode::Instantaneous => "instantaneous",
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![self.predictor.clone(), mode.to_string(), r.horizon.to_string()];
            rec.extend(r.mae.iter().map(|v| v.to_string()));
            rec.extend(r.mape.iter().map(|&v| opt(v)));
            rec.extend(r.rmse.iter().map(|v| v.to_string()));
            rec.push(r.mde_km.to_string());
            rec.push(opt(self.mtc_ms));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}
