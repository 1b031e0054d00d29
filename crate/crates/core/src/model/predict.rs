use std::io::Write;

use serde::{Deserialize, Serialize};

use super::network::{FlightNet, SoftPrediction};
use super::params::ParameterStore;
use super::tensor::Scalar;
use super::train::EncodedWindow;
use super::ModelError;
use crate::codec::{harden, quantize_point, reconstruct_clamped, Deltas, QuantizationSpec, TrajectoryPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictMode {
    /// all horizons from one pass
    #[default]
    Direct,
    /// one horizon per pass, fed back as a pseudo-observation
    Autoregressive,
}

/// Frozen network plus the quantization it was trained with.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub net: FlightNet,
    pub params: ParameterStore<T>,
    pub quantization: QuantizationSpec,
}

impl<T: Scalar> Model<T> {
    pub fn new(net: FlightNet, params: ParameterStore<T>, quantization: QuantizationSpec) -> Self {
        Self {
            net,
            params,
            quantization,
        }
    }

    fn encode(&self, observed: &[TrajectoryPoint]) -> Result<EncodedWindow, ModelError> {
        let cfg = self.net.config();
        if observed.len() != cfg.k {
            return Err(ModelError::ShapeMismatch {
                what: "observations",
                expected: (cfg.k, 1),
                actual: (observed.len(), 1),
            });
        }
        Ok(EncodedWindow::observations(
            observed,
            &self.quantization,
            self.net.layout(),
            cfg.representation,
        )?)
    }

    /// Per-bit probabilities for horizons `1..=n`.
    pub fn soft(&self, observed: &[TrajectoryPoint], n: usize) -> Result<SoftPrediction, ModelError> {
        let window = self.encode(observed)?;
        self.net.forward(&self.params, &window.input_as::<T>(), n)
    }

    fn deltas(&self, soft: &SoftPrediction) -> Result<Vec<Deltas>, ModelError> {
        let layout = self.net.layout();
        let repr = self.net.config().representation;
        (0..soft.horizons())
            .map(|h| Ok(harden(soft.row(h), layout)?.decode_as(layout, repr)))
            .collect()
    }

    fn direct(&self, observed: &[TrajectoryPoint], n: usize) -> Result<Vec<TrajectoryPoint>, ModelError> {
        let window = self.encode(observed)?;
        let soft = self.net.forward(&self.params, &window.input_as::<T>(), n)?;
        let deltas = self.deltas(&soft)?;
        Ok(reconstruct_clamped(
            &window.anchor,
            window.anchor_timestamp,
            &window.callsign,
            &deltas,
            &self.quantization,
            self.net.layout(),
        ))
    }

    fn autoregressive(&self, observed: &[TrajectoryPoint], n: usize) -> Result<Vec<TrajectoryPoint>, ModelError> {
        let mut window = observed.to_vec();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut next = self.direct(&window, 1)?;
            let point = next.pop().expect("one horizon");
            window.remove(0);
            window.push(point.clone());
            out.push(point);
        }
        Ok(out)
    }

    /// Predicted points for horizons `1..=n`, stamped 20 s apart after the
    /// last observation.
    pub fn predict(
        &self,
        observed: &[TrajectoryPoint],
        n: usize,
        mode: PredictMode,
    ) -> Result<Vec<TrajectoryPoint>, ModelError> {
        match mode {
            PredictMode::Direct => self.direct(observed, n),
            PredictMode::Autoregressive => self.autoregressive(observed, n),
        }
    }

    /// Pooled encoder vector of a window.
    pub fn embedding(&self, observed: &[TrajectoryPoint]) -> Result<Vec<f64>, ModelError> {
        let window = self.encode(observed)?;
        let v = self
            .net
            .trajectory_embedding(&self.params, &window.input_as::<T>())?;
        Ok(v.into_iter().map(Scalar::as_f64).collect())
    }

    /// Quantization round trip of a point, as the model sees it.
    pub fn snap(&self, p: &TrajectoryPoint) -> Result<TrajectoryPoint, ModelError> {
        let qp = quantize_point(p, &self.quantization, self.net.layout())?;
        Ok(crate::codec::dequantize_point(&qp, &self.quantization, p.timestamp, &p.callsign))
    }
}

/// One CSV row per window: callsign, timestamp of the last observation,
/// then the embedding components `e0..`.
pub fn write_embeddings_csv<W: Write>(
    out: W,
    rows: &[(String, i64, Vec<f64>)],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let dim = rows.first().map_or(0, |r| r.2.len());
    let mut header = vec!["callsign".to_string(), "timestamp".to_string()];
    header.extend((0..dim).map(|i| format!("e{i}")));
    w.write_record(&header)?;
    for (callsign, ts, v) in rows {
        let mut rec = vec![callsign.clone(), ts.to_string()];
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
