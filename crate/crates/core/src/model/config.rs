use serde::{Deserialize, Serialize};

use super::layers::Activation;
use super::tensor::Precision;
use super::ModelError;
use crate::codec::Representation;

/// How the encoder pools its per-position states into one trajectory vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// softmax-weighted sum with learned scores
    #[default]
    Attention,
    /// plain sum over positions
    Sum,
}

/// Per-point embedding of the joint input code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointEmbedding {
    /// convolution over the whole joint code (channel mix)
    #[default]
    Conv,
    /// one affine map per attribute code, outputs summed (channel independent)
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// observed points per window
    pub k: usize,
    /// predicted horizons
    pub n: usize,
    /// size of the horizon one-hot table
    pub max_horizons: usize,
    pub point_embed_dim: usize,
    pub horizon_embed_dim: usize,
    pub model_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub attention_heads: usize,
    /// defaults to `4 * model_dim`
    pub feedforward_dim: Option<usize>,
    pub conv_kernel: usize,
    pub conv_channels: usize,
    /// only 0.0 is supported
    pub dropout: f64,
    pub activation: Activation,
    pub precision: Precision,
    pub seed: u64,
    pub representation: Representation,
    pub pooling: Pooling,
    pub point_embedding: PointEmbedding,
    /// prepend the observed differential embeddings to the decoder sequence
    pub differential_prompt: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k: 9,
            n: 15,
            max_horizons: 32,
            point_embed_dim: 128,
            horizon_embed_dim: 128,
            model_dim: 64,
            encoder_layers: 4,
            decoder_layers: 2,
            attention_heads: 4,
            feedforward_dim: None,
            conv_kernel: 3,
            conv_channels: 8,
            dropout: 0.0,
            activation: Activation::Gelu,
            precision: Precision::F64,
            seed: 0,
            representation: Representation::Gray,
            pooling: Pooling::Attention,
            point_embedding: PointEmbedding::Conv,
            differential_prompt: true,
        }
    }
}

impl ModelConfig {
    /// Full-width network with 768-wide Transformer blocks.
    pub fn full_scale() -> Self {
        Self {
            model_dim: 768,
            ..Self::default()
        }
    }

    /// Small network for gradient checks and quick tests.
    pub fn toy() -> Self {
        Self {
            k: 4,
            n: 3,
            max_horizons: 8,
            point_embed_dim: 16,
            horizon_embed_dim: 16,
            model_dim: 16,
            encoder_layers: 2,
            decoder_layers: 2,
            attention_heads: 4,
            feedforward_dim: Some(32),
            conv_kernel: 3,
            conv_channels: 4,
            ..Self::default()
        }
    }

    pub fn ff_dim(&self) -> usize {
        self.feedforward_dim.unwrap_or(4 * self.model_dim)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.k < 2 {
            return fail(format!("k must be at least 2, got {}", self.k));
        }
        if self.n < 1 {
            return fail("n must be at least 1".into());
        }
        if self.n > self.max_horizons {
            return fail(format!(
                "n = {} exceeds the horizon table size {}",
                self.n, self.max_horizons
            ));
        }
        if self.attention_heads == 0 || self.model_dim % self.attention_heads != 0 {
            return fail(format!(
                "model_dim {} is not divisible by {} heads",
                self.model_dim, self.attention_heads
            ));
        }
        for (name, v) in [
            ("point_embed_dim", self.point_embed_dim),
            ("horizon_embed_dim", self.horizon_embed_dim),
            ("model_dim", self.model_dim),
            ("conv_channels", self.conv_channels),
            ("feedforward_dim", self.ff_dim()),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.conv_kernel % 2 == 0 {
            return fail(format!("conv_kernel must be odd, got {}", self.conv_kernel));
        }
        if self.dropout != 0.0 {
            return fail(format!("dropout {} is not supported; use 0.0", self.dropout));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::toy().validate().unwrap();
        ModelConfig::full_scale().validate().unwrap();
        assert_eq!(ModelConfig::default().ff_dim(), 256);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ModelConfig { model_dim: 30, ..Default::default() },
            ModelConfig { k: 1, ..Default::default() },
            ModelConfig { n: 0, ..Default::default() },
            ModelConfig { n: 40, ..Default::default() },
            ModelConfig { conv_kernel: 4, ..Default::default() },
            ModelConfig { dropout: 0.1, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
