use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::{evenly, load_dataset};
use super::{create_file, write_text, HarnessError};
use crate::baselines::{KalmanPredictor, NetworkPredictor, Predictor};
use crate::codec::TrajectoryPoint;
use crate::data::{load_csv, write_points, DataError};
use crate::geo::{mde_in, mtc, GeoError, HorizonMode, MetricTable};
use crate::model::{load_checkpoint, write_embeddings_csv, AdamConfig, Model, PredictMode, Precision, Scalar};

/// Loads the configured checkpoint and checks it against the configuration.
pub fn load_model<T: Scalar>(cfg: &RunConfig) -> Result<Model<T>, HarnessError> {
    let path = cfg.checkpoint_path();
    let ckpt = load_checkpoint::<T>(&path, Some(&cfg.model))?;
    if ckpt.quantization != cfg.quantization || ckpt.layout != cfg.widths {
        return Err(HarnessError::Config(format!(
            "{}: quantization or widths differ from the configuration",
            path.display()
        )));
    }
    let quantization = ckpt.quantization;
    let trainer = ckpt.into_trainer(AdamConfig::default())?;
    Ok(Model::new(trainer.net, trainer.params, quantization))
}

fn predictors<'a, T: Scalar>(cfg: &RunConfig, model: &'a Model<T>) -> Vec<Box<dyn Predictor + 'a>> {
    let mut out: Vec<Box<dyn Predictor + 'a>> = vec![Box::new(NetworkPredictor::direct(model))];
    if cfg.eval.autoregressive {
        out.push(Box::new(NetworkPredictor::autoregressive(model)));
    }
    if cfg.eval.kalman {
        out.push(Box::new(KalmanPredictor { config: cfg.kalman }));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub tables: Vec<MetricTable>,
    /// per predictor: MDE (km) at each horizon `1..=n`, cumulative and instantaneous
    pub mde_series: Vec<(String, Vec<f64>, Vec<f64>)>,
}

impl EvalReport {
    pub fn table(&self, predictor: &str, mode: HorizonMode) -> Option<&MetricTable> {
        self.tables.iter().find(|t| t.predictor == predictor && t.mode == mode)
    }
}

fn write_table(out: &Path, table: &MetricTable) -> Result<(), HarnessError> {
    let suffix = match table.mode {
        HorizonMode::Cumulative => "",
        HorizonMode::Instantaneous => "_instantaneous",
    };
    let stem = format!("metrics_{}{suffix}", table.predictor);
    let csv_path = out.join(format!("{stem}.csv"));
    table
        .write_csv(create_file(&csv_path)?)
        .map_err(|e| HarnessError::Data(DataError::Csv(e)))?;
    write_text(&out.join(format!("{stem}.json")), &(table.to_json() + "\n"))
}

fn eval_with<T: Scalar>(cfg: &RunConfig, out: &Path) -> Result<EvalReport, HarnessError> {
    let model = load_model::<T>(cfg)?;
    let ds = load_dataset(cfg)?;
    let split = cfg.eval.split;
    let windows = evenly(ds.windows(split), cfg.eval.max_windows);
    if windows.is_empty() {
        return Err(DataError::EmptySplit(split.name()).into());
    }
    let n = cfg.model.n;
    let cutoffs: Vec<usize> = cfg.eval.cutoffs.iter().copied().filter(|&h| h <= n).collect();
    let truth: Vec<Vec<TrajectoryPoint>> = windows.iter().map(|w| w.targets.clone()).collect();
    let mut report = EvalReport {
        split: split.name().to_string(),
        tables: Vec::new(),
        mde_series: Vec::new(),
    };
    let mut modes = vec![HorizonMode::Cumulative];
    if cfg.eval.instantaneous {
        modes.push(HorizonMode::Instantaneous);
    }
    for p in predictors(cfg, &model) {
        let pred = windows
            .iter()
            .map(|w| p.predict(&w.observations, n))
            .collect::<Result<Vec<_>, _>>()?;
        for &mode in &modes {
            let table = MetricTable::compute(p.name(), &pred, &truth, &cutoffs, mode)?;
            write_table(out, &table)?;
            report.tables.push(table);
        }
        let series = |mode| (1..=n).map(|h| mde_in(&pred, &truth, h, mode)).collect::<Result<Vec<_>, GeoError>>();
        report.mde_series.push((
            p.name().to_string(),
            series(HorizonMode::Cumulative)?,
            series(HorizonMode::Instantaneous)?,
        ));
    }

    let series_path = out.join("mde_series.csv");
    let mut f = create_file(&series_path)?;
    let io = |e| HarnessError::io(&series_path, e);
    let mut header = vec!["horizon".to_string()];
    for (name, _, _) in &report.mde_series {
        header.push(format!("{name}_cumulative_km"));
        header.push(format!("{name}_instantaneous_km"));
    }
    writeln!(f, "{}", header.join(",")).map_err(io)?;
    for h in 0..n {
        let mut row = vec![(h + 1).to_string()];
        for (_, cum, inst) in &report.mde_series {
            row.push(cum[h].to_string());
            row.push(inst[h].to_string());
        }
        writeln!(f, "{}", row.join(",")).map_err(io)?;
    }
    f.flush().map_err(io)?;

    if cfg.eval.embeddings {
        let rows = windows
            .iter()
            .map(|w| {
                let last = w.observations.last().expect("k >= 2");
                Ok((last.callsign.clone(), last.timestamp, model.embedding(&w.observations)?))
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let path = out.join("embeddings.csv");
        write_embeddings_csv(create_file(&path)?, &rows).map_err(DataError::Csv)?;
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&out.join("metrics.json"), &(json + "\n"))?;
    Ok(report)
}

/// Metric tables for the network in direct and autoregressive mode and for
/// the Kalman baseline, plus the per-horizon MDE series.
pub fn cmd_eval(cfg: &RunConfig, out: &Path) -> Result<EvalReport, HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    match cfg.model.precision {
        Precision::F64 => eval_with::<f64>(cfg, out),
        Precision::F32 => eval_with::<f32>(cfg, out),
    }
}

fn predict_with<T: Scalar>(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Vec<TrajectoryPoint>, HarnessError> {
    let model = load_model::<T>(cfg)?;
    let k = cfg.model.k;
    let report = load_csv(input, 1)?;
    if report.tracks.is_empty() {
        return Err(HarnessError::InsufficientObservations {
            callsign: String::new(),
            got: 0,
            need: k,
        });
    }
    let mut predictions = Vec::new();
    for track in &report.tracks {
        if track.len() < k {
            return Err(HarnessError::InsufficientObservations {
                callsign: track.callsign.clone(),
                got: track.len(),
                need: k,
            });
        }
        let observed = &track.points[track.len() - k..];
        predictions.extend(model.predict(observed, cfg.model.n, cfg.predict.mode)?);
    }
    write_points(create_file(&out.join("predictions.csv"))?, &predictions)?;
    Ok(predictions)
}

/// Predicts `n` points after the last `k` observations of every track in
/// `input` and writes them to `predictions.csv`.
pub fn cmd_predict(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Vec<TrajectoryPoint>, HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    match cfg.model.precision {
        Precision::F64 => predict_with::<f64>(cfg, input, out),
        Precision::F32 => predict_with::<f32>(cfg, input, out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub predictor: String,
    pub horizons: usize,
    pub mtc_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub windows: usize,
    pub entries: Vec<BenchEntry>,
    pub ratios: Vec<(String, f64)>,
}

impl BenchReport {
    pub fn mtc(&self, predictor: &str, horizons: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.predictor == predictor && e.horizons == horizons)
            .map(|e| e.mtc_ms)
    }

    pub fn ratio(&self, name: &str) -> Option<f64> {
        self.ratios.iter().find(|(r, _)| r == name).map(|r| r.1)
    }
}

fn bench_with<T: Scalar>(cfg: &RunConfig, out: &Path) -> Result<BenchReport, HarnessError> {
    let model = load_model::<T>(cfg)?;
    let ds = load_dataset(cfg)?;
    let need = cfg.bench.windows;
    let windows = evenly(ds.windows(cfg.eval.split), Some(need));
    if windows.len() < need {
        return Err(GeoError::TooFewWindows { got: windows.len(), need }.into());
    }
    let observed: Vec<&[TrajectoryPoint]> = windows.iter().map(|w| w.observations.as_slice()).collect();
    let n = cfg.model.n;
    let mut entries = Vec::new();
    for mode in [PredictMode::Direct, PredictMode::Autoregressive] {
        let name = match mode {
            PredictMode::Direct => "direct",
            PredictMode::Autoregressive => "autoregressive",
        };
        for h in [n, 1] {
            let ms = mtc(&observed, |o| model.predict(o, h, mode))?;
            entries.push(BenchEntry {
                predictor: name.into(),
                horizons: h,
                mtc_ms: ms,
            });
        }
    }
    let kf = KalmanPredictor { config: cfg.kalman };
    entries.push(BenchEntry {
        predictor: "kf".into(),
        horizons: n,
        mtc_ms: mtc(&observed, |o| kf.predict(o, n))?,
    });
    let mut report = BenchReport {
        windows: windows.len(),
        entries,
        ratios: Vec::new(),
    };
    let get = |p: &str, h: usize| report.mtc(p, h).expect("measured");
    report.ratios = vec![
        (format!("direct_{n}/direct_1"), get("direct", n) / get("direct", 1)),
        (format!("autoregressive_{n}/autoregressive_1"), get("autoregressive", n) / get("autoregressive", 1)),
        (format!("autoregressive_{n}/direct_{n}"), get("autoregressive", n) / get("direct", n)),
        (format!("kf_{n}/direct_{n}"), get("kf", n) / get("direct", n)),
    ];

    let path = out.join("bench.csv");
    let mut f = create_file(&path)?;
    let io = |e| HarnessError::io(&path, e);
    writeln!(f, "predictor,horizons,mtc_ms").map_err(io)?;
    for e in &report.entries {
        writeln!(f, "{},{},{}", e.predictor, e.horizons, e.mtc_ms).map_err(io)?;
    }
    f.flush().map_err(io)?;
    let path = out.join("bench_ratios.csv");
    let mut f = create_file(&path)?;
    let io = |e| HarnessError::io(&path, e);
    writeln!(f, "ratio,value").map_err(io)?;
    for (name, v) in &report.ratios {
        writeln!(f, "{name},{v}").map_err(io)?;
    }
    f.flush().map_err(io)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&out.join("bench.json"), &(json + "\n"))?;
    Ok(report)
}

/// Mean time cost per window at batch size one for direct and
/// autoregressive inference (at `n` and one horizon) and for the Kalman
/// baseline, with their ratios.
pub fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<BenchReport, HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    match cfg.model.precision {
        Precision::F64 => bench_with::<f64>(cfg, out),
        Precision::F32 => bench_with::<f32>(cfg, out),
    }
}
