//! Binary checkpoint container.
//!
//! Layout: the magic bytes, a little-endian `u32` header length, a JSON
//! header (configs, step, parameter names and shapes), every parameter array
//! as raw little-endian values in header order, then the Adam moments when
//! present.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::FlightNet;
use super::optim::{Adam, AdamConfig};
use super::params::{ParamEntry, ParamId, ParameterStore};
use super::tensor::{Precision, Scalar};
use super::train::Trainer;
use super::{ModelConfig, ModelError};
use crate::codec::{BitWidthSpec, QuantizationSpec};

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"TRAJCAST1";

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub layout: BitWidthSpec,
    pub quantization: QuantizationSpec,
    pub step: u64,
    pub params: ParameterStore<T>,
    pub adam: Option<Adam<T>>,
}

#[derive(Serialize, Deserialize)]
struct ParamHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    layout: BitWidthSpec,
    quantization: QuantizationSpec,
    precision: Precision,
    step: u64,
    optimizer: Option<OptimizerHeader>,
    params: Vec<ParamHeader>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    config: AdamConfig,
    t: u64,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn from_trainer(trainer: &Trainer<T>, quantization: QuantizationSpec) -> Self {
        Self {
            config: trainer.net.config().clone(),
            layout: *trainer.net.layout(),
            quantization,
            step: trainer.step,
            params: trainer.params.clone(),
            adam: Some(trainer.adam.clone()),
        }
    }

    /// Rebuilds a trainer; a checkpoint without optimizer state starts fresh
    /// moments with `adam`.
    pub fn into_trainer(self, adam: AdamConfig) -> Result<Trainer<T>, ModelError> {
        let (net, _) = FlightNet::new::<T>(&self.config, &self.layout)?;
        let len = self.params.len();
        Ok(Trainer {
            net,
            params: self.params,
            adam: self.adam.unwrap_or_else(|| Adam::new(adam, len)),
            step: self.step,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            model: self.config.clone(),
            layout: self.layout,
            quantization: self.quantization,
            precision: T::PRECISION,
            step: self.step,
            optimizer: self.adam.as_ref().map(|a| OptimizerHeader {
                config: a.config,
                t: a.t,
            }),
            params: self
                .params
                .entries()
                .iter()
                .map(|e| ParamHeader {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(json.len() + 16 + self.params.len() * T::BYTES * 3);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut write = |vals: &[T]| {
            for &v in vals {
                v.write_le(&mut out);
            }
        };
        write(self.params.values());
        if let Some(a) = &self.adam {
            write(&a.m);
            write(&a.v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |msg: &str| ModelError::Checkpoint(msg.to_string());
        let rest = bytes
            .strip_prefix(CHECKPOINT_MAGIC.as_slice())
            .ok_or_else(|| bad("missing magic"))?;
        if rest.len() < 4 {
            return Err(bad("truncated header length"));
        }
        let hlen = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        let rest = &rest[4..];
        if rest.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&rest[..hlen]).map_err(|e| ModelError::Checkpoint(format!("header: {e}")))?;
        if header.precision != T::PRECISION {
            return Err(ModelError::Checkpoint(format!(
                "stored precision {:?} differs from requested {:?}",
                header.precision,
                T::PRECISION
            )));
        }
        let mut data = &rest[hlen..];
        let mut read = |count: usize| -> Result<Vec<T>, ModelError> {
            let need = count * T::BYTES;
            if data.len() < need {
                return Err(bad("truncated values"));
            }
            let vals = data[..need].chunks_exact(T::BYTES).map(T::read_le).collect();
            data = &data[need..];
            Ok(vals)
        };

        let mut entries = Vec::with_capacity(header.params.len());
        let mut offset = 0;
        for p in &header.params {
            let len = p.shape.iter().product();
            entries.push(ParamEntry {
                name: p.name.clone(),
                shape: p.shape.clone(),
                id: ParamId { offset, len },
            });
            offset += len;
        }
        let values = read(offset)?;
        let params = ParameterStore::from_parts(entries, values);

        let (_, reference) = FlightNet::new::<T>(&header.model, &header.layout)?;
        let same_layout = reference.entries().len() == params.entries().len()
            && reference
                .entries()
                .iter()
                .zip(params.entries())
                .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if !same_layout {
            return Err(bad("parameter layout does not match the stored configuration"));
        }

        let adam = match &header.optimizer {
            Some(o) => {
                let m = read(offset)?;
                let v = read(offset)?;
                Some(Adam {
                    config: o.config,
                    m,
                    v,
                    t: o.t,
                })
            }
            None => None,
        };
        if !data.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            config: header.model,
            layout: header.layout,
            quantization: header.quantization,
            step: header.step,
            params,
            adam,
        })
    }
}

pub fn save_checkpoint<T: Scalar>(path: &Path, ckpt: &Checkpoint<T>) -> Result<(), ModelError> {
    fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

/// Reads a checkpoint; when `expected` is given the stored model
/// configuration must equal it.
pub fn load_checkpoint<T: Scalar>(path: &Path, expected: Option<&ModelConfig>) -> Result<Checkpoint<T>, ModelError> {
    let ckpt = Checkpoint::from_bytes(&fs::read(path)?)?;
    if let Some(cfg) = expected {
        if *cfg != ckpt.config {
            return Err(ModelError::Checkpoint(
                "stored model configuration differs from the requested one".into(),
            ));
        }
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_trainer() -> Trainer<f64> {
        Trainer::new(&ModelConfig::toy(), &BitWidthSpec::default(), AdamConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut trainer = toy_trainer();
        trainer.adam.m[3] = 0.25;
        trainer.adam.t = 7;
        trainer.step = 7;
        let ckpt = Checkpoint::from_trainer(&trainer, QuantizationSpec::default());
        let bytes = ckpt.to_bytes();
        assert_eq!(&bytes[..9], b"TRAJCAST1");
        let back = Checkpoint::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back.params, trainer.params);
        assert_eq!(back.adam.as_ref().unwrap(), &trainer.adam);
        assert_eq!(back.step, 7);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corruption_and_mismatch() {
        let trainer = toy_trainer();
        let bytes = Checkpoint::from_trainer(&trainer, QuantizationSpec::default()).to_bytes();
        assert!(Checkpoint::<f64>::from_bytes(&bytes[1..]).is_err());
        assert!(Checkpoint::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::<f32>::from_bytes(&bytes).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        fs::write(&path, &bytes).unwrap();
        let other = ModelConfig {
            seed: 99,
            ..ModelConfig::toy()
        };
        assert!(load_checkpoint::<f64>(&path, Some(&other)).is_err());
        assert!(load_checkpoint::<f64>(&path, Some(&ModelConfig::toy())).is_ok());
    }
}
