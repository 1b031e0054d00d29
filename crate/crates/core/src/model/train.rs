use super::loss::{bce_grad, bce_loss};
use super::network::{FlightNet, NetInput};
use super::optim::{Adam, AdamConfig};
use super::params::ParameterStore;
use super::tensor::{Matrix, Scalar};
use super::{ModelConfig, ModelError};
use crate::codec::{
    diff_sequence, encode_point_as, quantize_point, BitWidthSpec, CodecError, DifferentialCode,
    QuantizationSpec, QuantizedPoint, Representation, TrajectoryPoint,
};

/// A window ready for the network: bit inputs of the observations and the
/// differential bit targets of the future points.
#[derive(Debug, Clone)]
pub struct EncodedWindow {
    pub input: NetInput<f64>,
    /// `[n x 48]`, empty when encoded for inference only
    pub targets: Matrix<f64>,
    /// the most recent observation, from which predictions are accumulated
    pub anchor: QuantizedPoint,
    pub anchor_timestamp: i64,
    pub callsign: String,
}

fn bits_matrix(rows: Vec<Vec<f64>>, cols: usize) -> Matrix<f64> {
    if rows.is_empty() {
        return Matrix::zeros(0, cols);
    }
    Matrix::from_rows(&rows)
}

impl EncodedWindow {
    /// Encodes observations only.
    pub fn observations(
        observed: &[TrajectoryPoint],
        q: &QuantizationSpec,
        w: &BitWidthSpec,
        repr: Representation,
    ) -> Result<Self, CodecError> {
        Self::encode(observed, &[], q, w, repr)
    }

    /// Encodes `observed` as input and the steps into `future` as targets.
    /// Fails on the first delta that does not fit its signed field.
    pub fn encode(
        observed: &[TrajectoryPoint],
        future: &[TrajectoryPoint],
        q: &QuantizationSpec,
        w: &BitWidthSpec,
        repr: Representation,
    ) -> Result<Self, CodecError> {
        if observed.len() < 2 {
            return Err(CodecError::TooShort { len: observed.len() });
        }
        let quantized = observed
            .iter()
            .chain(future)
            .map(|p| quantize_point(p, q, w))
            .collect::<Result<Vec<_>, _>>()?;
        let k = observed.len();
        let points = quantized[..k]
            .iter()
            .map(|qp| Ok(encode_point_as(qp, w, repr)?.joint.to_f64_vec()))
            .collect::<Result<Vec<_>, CodecError>>()?;
        let codes = diff_sequence(&quantized)?
            .iter()
            .map(|d| Ok(DifferentialCode::encode_as(d, w, repr)?.joint.to_f64_vec()))
            .collect::<Result<Vec<_>, CodecError>>()?;
        let mut codes = codes.into_iter();
        let diffs: Vec<_> = codes.by_ref().take(k - 1).collect();
        let targets: Vec<_> = codes.collect();
        let anchor = &observed[k - 1];
        Ok(Self {
            input: NetInput {
                points: bits_matrix(points, w.input_total()),
                diffs: bits_matrix(diffs, w.diff_total()),
            },
            targets: bits_matrix(targets, w.diff_total()),
            anchor: quantized[k - 1],
            anchor_timestamp: anchor.timestamp,
            callsign: anchor.callsign.clone(),
        })
    }

    pub fn horizons(&self) -> usize {
        self.targets.rows()
    }

    pub fn input_as<T: Scalar>(&self) -> NetInput<T> {
        NetInput {
            points: self.input.points.cast(),
            diffs: self.input.diffs.cast(),
        }
    }
}

/// Network, parameters and optimizer state for minibatch training.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub net: FlightNet,
    pub params: ParameterStore<T>,
    pub adam: Adam<T>,
    pub step: u64,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(cfg: &ModelConfig, layout: &BitWidthSpec, adam: AdamConfig) -> Result<Self, ModelError> {
        let (net, params) = FlightNet::new(cfg, layout)?;
        let adam = Adam::new(adam, params.len());
        Ok(Self {
            net,
            params,
            adam,
            step: 0,
        })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.adam.config.lr = lr;
    }

    fn points(batch: &[&EncodedWindow]) -> Result<usize, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let total: usize = batch.iter().map(|w| w.horizons()).sum();
        if total == 0 {
            return Err(ModelError::EmptyBatch);
        }
        Ok(total)
    }

    /// Batch loss without touching gradients.
    pub fn loss(&self, batch: &[&EncodedWindow]) -> Result<f64, ModelError> {
        let total = Self::points(batch)?;
        let mut acc = 0.0;
        for w in batch {
            let trace = self.net.forward_trace(&self.params, &w.input_as::<T>(), w.horizons())?;
            let targets = w.targets.cast::<T>();
            acc += bce_loss(&trace.decoder.probs, &targets, self.net.layout())? * w.horizons() as f64;
        }
        Ok(acc / total as f64)
    }

    /// Batch loss and its gradient with respect to every parameter.
    pub fn gradient(&self, batch: &[&EncodedWindow]) -> Result<(f64, Vec<T>), ModelError> {
        let total = Self::points(batch)?;
        let layout = *self.net.layout();
        let mut grads = self.params.zeros_like();
        let mut acc = 0.0;
        for w in batch {
            let n = w.horizons();
            let trace = self.net.forward_trace(&self.params, &w.input_as::<T>(), n)?;
            let targets = w.targets.cast::<T>();
            acc += bce_loss(&trace.decoder.probs, &targets, &layout)? * n as f64;
            let dlogits = bce_grad(&trace.decoder.probs, &targets, &layout, total)?;
            self.net.backward(&self.params, &mut grads, &trace, &dlogits);
        }
        Ok((acc / total as f64, grads))
    }

    /// One Adam update on `batch`; returns the loss before the update.
    pub fn train_step(&mut self, batch: &[&EncodedWindow]) -> Result<f64, ModelError> {
        let (loss, grads) = self.gradient(batch)?;
        if !grads.iter().all(|g| g.is_finite()) || !loss.is_finite() {
            return Err(ModelError::NonFiniteGradient { step: self.step });
        }
        self.adam.step(self.params.values_mut(), &grads);
        self.step += 1;
        Ok(loss)
    }
}
