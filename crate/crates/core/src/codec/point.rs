use serde::{Deserialize, Serialize};

use super::bits::BitVector;
use super::layout::{Attribute, BitWidthSpec, QuantizationSpec, Representation};
use super::CodecError;

/// One timestamped flight state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Unix epoch seconds.
    pub timestamp: i64,
    pub callsign: String,
    /// degrees
    pub lon: f64,
    /// degrees
    pub lat: f64,
    /// meters
    pub alt: f64,
    /// km/h, east positive
    pub vx: f64,
    /// km/h, north positive
    pub vy: f64,
    /// km/h, up positive
    pub vz: f64,
}

impl TrajectoryPoint {
    pub fn get(&self, attr: Attribute) -> f64 {
        match attr {
            Attribute::Lon => self.lon,
            Attribute::Lat => self.lat,
            Attribute::Alt => self.alt,
            Attribute::Vx => self.vx,
            Attribute::Vy => self.vy,
            Attribute::Vz => self.vz,
        }
    }

    pub fn set(&mut self, attr: Attribute, value: f64) {
        match attr {
            Attribute::Lon => self.lon = value,
            Attribute::Lat => self.lat = value,
            Attribute::Alt => self.alt = value,
            Attribute::Vx => self.vx = value,
            Attribute::Vy => self.vy = value,
            Attribute::Vz => self.vz = value,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        Attribute::ALL.map(|a| self.get(a))
    }
}

/// Integer quantization units of the six attributes, each in `0..2^width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct QuantizedPoint {
    values: [i64; 6],
}

impl QuantizedPoint {
    pub fn new(values: [i64; 6], w: &BitWidthSpec) -> Result<Self, CodecError> {
        for attr in Attribute::ALL {
            let v = values[attr.index()];
            if v < 0 || v > w.input_max(attr) {
                return Err(CodecError::OutOfRange {
                    attribute: attr,
                    value: v,
                    width: w.input_width(attr),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, attr: Attribute) -> i64 {
        self.values[attr.index()]
    }

    pub fn values(&self) -> [i64; 6] {
        self.values
    }
}

/// Joint Gray code of a point: the six per-attribute codes concatenated in
/// (lon, lat, alt, vx, vy, vz) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPoint {
    pub joint: BitVector,
}

impl EncodedPoint {
    /// Per-attribute Gray code cut out at its fixed offset.
    pub fn field(&self, attr: Attribute, w: &BitWidthSpec) -> BitVector {
        self.joint
            .slice(w.input_offsets()[attr.index()], w.input_width(attr))
    }
}

/// Maps each attribute to `round(value / step) + offset` (ties away from
/// zero) and checks the result against its bit width.
pub fn quantize_point(
    p: &TrajectoryPoint,
    q: &QuantizationSpec,
    w: &BitWidthSpec,
) -> Result<QuantizedPoint, CodecError> {
    let mut values = [0i64; 6];
    for attr in Attribute::ALL {
        let raw = p.get(attr);
        if !raw.is_finite() {
            return Err(CodecError::NonFinite { attribute: attr });
        }
        let scaled = (raw / q.step(attr)).round();
        // keeps the cast below from saturating silently
        if scaled.abs() > 1e15 {
            return Err(CodecError::OutOfRange {
                attribute: attr,
                value: if scaled > 0.0 { i64::MAX } else { i64::MIN },
                width: w.input_width(attr),
            });
        }
        values[attr.index()] = scaled as i64 + q.offset(attr);
    }
    QuantizedPoint::new(values, w)
}

/// Real-valued attributes of a quantized point: `(value - offset) * step`.
pub fn dequantize(qp: &QuantizedPoint, q: &QuantizationSpec) -> [f64; 6] {
    Attribute::ALL.map(|a| (qp.get(a) - q.offset(a)) as f64 * q.step(a))
}

/// Dequantized point carrying the given timestamp and callsign.
pub fn dequantize_point(
    qp: &QuantizedPoint,
    q: &QuantizationSpec,
    timestamp: i64,
    callsign: &str,
) -> TrajectoryPoint {
    let [lon, lat, alt, vx, vy, vz] = dequantize(qp, q);
    TrajectoryPoint {
        timestamp,
        callsign: callsign.to_string(),
        lon,
        lat,
        alt,
        vx,
        vy,
        vz,
    }
}

pub fn encode_point(qp: &QuantizedPoint, w: &BitWidthSpec) -> Result<EncodedPoint, CodecError> {
    encode_point_as(qp, w, Representation::Gray)
}

pub fn encode_point_as(
    qp: &QuantizedPoint,
    w: &BitWidthSpec,
    repr: Representation,
) -> Result<EncodedPoint, CodecError> {
    let parts = Attribute::ALL
        .iter()
        .map(|&a| repr.encode(qp.get(a) as u64, w.input_width(a)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EncodedPoint {
        joint: BitVector::concat(&parts),
    })
}
