//! Signed differential coding: per-step attribute deltas stored as a sign
//! bit followed by the Gray code of the magnitude.

use super::bits::BitVector;
use super::layout::{Attribute, BitWidthSpec, QuantizationSpec, Representation};
use super::point::{dequantize_point, QuantizedPoint, TrajectoryPoint};
use super::CodecError;

/// Spacing between consecutive trajectory points, in seconds.
pub const STEP_SECONDS: i64 = 20;

/// Per-attribute signed deltas between two consecutive quantized points,
/// indexed by [`Attribute::index`].
pub type Deltas = [i64; 6];

/// One sign-magnitude field. `sign_bit == 1` means negative; a zero
/// magnitude always carries sign 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferentialField {
    pub sign_bit: u8,
    pub magnitude_gray: BitVector,
}

impl DifferentialField {
    pub fn width(&self) -> usize {
        self.magnitude_gray.width() + 1
    }

    pub fn to_bits(&self) -> BitVector {
        let sign = BitVector::from_bits(vec![self.sign_bit]).expect("sign bit is 0 or 1");
        BitVector::concat([&sign, &self.magnitude_gray])
    }

    pub fn from_bits(bits: &BitVector) -> Result<Self, CodecError> {
        if bits.width() < 2 {
            return Err(CodecError::InvalidWidth(bits.width()));
        }
        Ok(Self {
            sign_bit: bits.get(0),
            magnitude_gray: bits.slice(1, bits.width() - 1),
        })
    }
}

/// Six differential fields concatenated in attribute order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferentialCode {
    pub joint: BitVector,
}

impl DifferentialCode {
    pub fn encode(deltas: &Deltas, w: &BitWidthSpec) -> Result<Self, CodecError> {
        Self::encode_as(deltas, w, Representation::Gray)
    }

    pub fn encode_as(deltas: &Deltas, w: &BitWidthSpec, repr: Representation) -> Result<Self, CodecError> {
        let fields = Attribute::ALL
            .iter()
            .map(|&a| {
                encode_differential_as(deltas[a.index()], w.diff_width(a), repr)
                    .map(|f| f.to_bits())
                    .map_err(|e| e.with_attribute(a))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            joint: BitVector::concat(&fields),
        })
    }

    pub fn field(&self, attr: Attribute, w: &BitWidthSpec) -> DifferentialField {
        let bits = self
            .joint
            .slice(w.diff_offsets()[attr.index()], w.diff_width(attr));
        DifferentialField::from_bits(&bits).expect("layout widths are at least 2")
    }

    pub fn decode(&self, w: &BitWidthSpec) -> Deltas {
        self.decode_as(w, Representation::Gray)
    }

    pub fn decode_as(&self, w: &BitWidthSpec, repr: Representation) -> Deltas {
        Attribute::ALL.map(|a| decode_differential_as(&self.field(a, w), repr))
    }
}

/// Consecutive differences `point[i+1] - point[i]` for every attribute.
pub fn diff_sequence(points: &[QuantizedPoint]) -> Result<Vec<Deltas>, CodecError> {
    if points.len() < 2 {
        return Err(CodecError::TooShort { len: points.len() });
    }
    Ok(points
        .windows(2)
        .map(|pair| Attribute::ALL.map(|a| pair[1].get(a) - pair[0].get(a)))
        .collect())
}

pub fn encode_differential(delta: i64, width: usize) -> Result<DifferentialField, CodecError> {
    encode_differential_as(delta, width, Representation::Gray)
}

/// Sign bit plus the magnitude in the given representation.
pub fn encode_differential_as(
    delta: i64,
    width: usize,
    repr: Representation,
) -> Result<DifferentialField, CodecError> {
    if !(2..=63).contains(&width) {
        return Err(CodecError::InvalidWidth(width));
    }
    let magnitude = delta.unsigned_abs();
    if magnitude >> (width - 1) != 0 {
        return Err(CodecError::DeltaOverflow {
            attribute: None,
            delta,
            width,
        });
    }
    Ok(DifferentialField {
        sign_bit: (delta < 0) as u8,
        magnitude_gray: repr.encode(magnitude, width - 1)?,
    })
}

/// Signed value of a field; a negative zero decodes to 0.
pub fn decode_differential(f: &DifferentialField) -> i64 {
    decode_differential_as(f, Representation::Gray)
}

pub fn decode_differential_as(f: &DifferentialField, repr: Representation) -> i64 {
    let magnitude = repr.decode(&f.magnitude_gray) as i64;
    if f.sign_bit == 1 {
        -magnitude
    } else {
        magnitude
    }
}

/// Thresholds per-bit probabilities into a differential code: a bit is set
/// only when its probability is strictly above 0.5.
pub fn harden(soft: &[f64], w: &BitWidthSpec) -> Result<DifferentialCode, CodecError> {
    if soft.len() != w.diff_total() {
        return Err(CodecError::WidthMismatch {
            expected: w.diff_total(),
            actual: soft.len(),
        });
    }
    let bits = soft.iter().map(|&p| (p > 0.5) as u8).collect();
    Ok(DifferentialCode {
        joint: BitVector::from_bits(bits)?,
    })
}

fn cumulative(anchor: &QuantizedPoint, deltas: &[Deltas]) -> Vec<[i64; 6]> {
    let mut current = anchor.values();
    deltas
        .iter()
        .map(|d| {
            for (c, step) in current.iter_mut().zip(d) {
                *c += step;
            }
            current
        })
        .collect()
}

/// Rebuilds a trajectory from an anchor point and a sequence of deltas by
/// cumulative summation. Point `j` is stamped `anchor_timestamp + 20 (j+1)`.
/// Fails if any cumulative value leaves the representable envelope.
pub fn reconstruct(
    anchor: &QuantizedPoint,
    anchor_timestamp: i64,
    callsign: &str,
    deltas: &[Deltas],
    q: &QuantizationSpec,
    w: &BitWidthSpec,
) -> Result<Vec<TrajectoryPoint>, CodecError> {
    if deltas.is_empty() {
        return Err(CodecError::TooShort { len: 0 });
    }
    cumulative(anchor, deltas)
        .into_iter()
        .enumerate()
        .map(|(j, values)| {
            for attr in Attribute::ALL {
                let v = values[attr.index()];
                if v < 0 || v > w.input_max(attr) {
                    return Err(CodecError::ReconstructionOutOfRange {
                        attribute: attr,
                        horizon: j + 1,
                        value: v,
                    });
                }
            }
            let qp = QuantizedPoint::new(values, w)?;
            Ok(dequantize_point(
                &qp,
                q,
                anchor_timestamp + STEP_SECONDS * (j as i64 + 1),
                callsign,
            ))
        })
        .collect()
}

/// Inference-time variant of [`reconstruct`]: cumulative values are clamped
/// into the envelope at every step, so a prediction is always produced.
pub fn reconstruct_clamped(
    anchor: &QuantizedPoint,
    anchor_timestamp: i64,
    callsign: &str,
    deltas: &[Deltas],
    q: &QuantizationSpec,
    w: &BitWidthSpec,
) -> Vec<TrajectoryPoint> {
    let mut current = anchor.values();
    deltas
        .iter()
        .enumerate()
        .map(|(j, d)| {
            for attr in Attribute::ALL {
                let i = attr.index();
                current[i] = (current[i] + d[i]).clamp(0, w.input_max(attr));
            }
            let qp = QuantizedPoint::new(current, w).expect("clamped into envelope");
            dequantize_point(
                &qp,
                q,
                anchor_timestamp + STEP_SECONDS * (j as i64 + 1),
                callsign,
            )
        })
        .collect()
}
