//! Quantization and bit-level coding of flight states.
//!
//! A [`TrajectoryPoint`] is quantized per attribute, each integer is Gray
//! coded on its configured width and the six codes are concatenated into the
//! 78-bit network input. Targets are per-step deltas, stored sign-magnitude
//! with a Gray-coded magnitude in a 48-bit [`DifferentialCode`].

mod bits;
mod diff;
mod layout;
mod point;

pub use bits::{
    binary_encode, binary_from_gray, gray_decode, gray_encode, gray_from_binary,
    hamming_distance, BitVector, MAX_WIDTH,
};
pub use diff::{
    decode_differential, decode_differential_as, diff_sequence, encode_differential,
    encode_differential_as, harden, reconstruct,
    reconstruct_clamped, Deltas, DifferentialCode, DifferentialField, STEP_SECONDS,
};
pub use layout::{
    Attribute, BitWidthSpec, QuantizationSpec, Representation, DIFF_WIDTH, INPUT_WIDTH,
};
pub use point::{
    dequantize, dequantize_point, encode_point, encode_point_as, quantize_point, EncodedPoint, QuantizedPoint,
    TrajectoryPoint,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("{attribute} quantizes to {value}, outside 0..2^{width}")]
    OutOfRange {
        attribute: Attribute,
        value: i64,
        width: usize,
    },
    #[error("{attribute} is not finite")]
    NonFinite { attribute: Attribute },
    #[error("value {value} does not fit in {width} bits")]
    Overflow { value: u64, width: usize },
    #[error("unsupported bit width {0}")]
    InvalidWidth(usize),
    #[error("invalid bit character {0:?}")]
    InvalidBit(char),
    #[error("expected width {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("sequence of length {len} is too short")]
    TooShort { len: usize },
    #[error("delta {delta}{} does not fit a {width}-bit signed field", attribute.map(|a| format!(" ({a})")).unwrap_or_default())]
    DeltaOverflow {
        attribute: Option<Attribute>,
        delta: i64,
        width: usize,
    },
    #[error("reconstructed {attribute} leaves the envelope at horizon {horizon} (value {value})")]
    ReconstructionOutOfRange {
        attribute: Attribute,
        horizon: usize,
        value: i64,
    },
    #[error("invalid codec configuration: {0}")]
    InvalidSpec(String),
}

impl CodecError {
    pub(crate) fn with_attribute(self, attr: Attribute) -> Self {
        match self {
            CodecError::DeltaOverflow { delta, width, .. } => CodecError::DeltaOverflow {
                attribute: Some(attr),
                delta,
                width,
            },
            other => other,
        }
    }
}
