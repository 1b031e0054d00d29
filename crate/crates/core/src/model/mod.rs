//! The bit-level trajectory prediction network with hand-written reverse
//! mode differentiation, its BCE objective, Adam, checkpoints and inference.

mod checkpoint;
mod config;
mod layers;
mod loss;
mod network;
mod optim;
mod params;
mod predict;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use config::{ModelConfig, PointEmbedding, Pooling};
pub use layers::{
    sigmoid, sinusoidal_positions, softmax_in_place, Activation, Attention, AttentionCache, Block,
    BlockCache, ConvEmbed, LayerNorm, Linear,
};
pub use loss::{bce_grad, bce_loss, BCE_EPS};
pub use network::{FlightNet, NetInput, SoftPrediction, Trace, TrajEmbedding};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamBuilder, ParamEntry, ParamId, ParameterStore};
pub use predict::{write_embeddings_csv, Model, PredictMode};
pub use tensor::{Matrix, Precision, Scalar};
pub use train::{EncodedWindow, Trainer};

use thiserror::Error;

use crate::codec::CodecError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("{what}: expected shape {expected:?}, got {actual:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },
    #[error("horizon count {n} outside 1..={max}")]
    HorizonOutOfRange { n: usize, max: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
