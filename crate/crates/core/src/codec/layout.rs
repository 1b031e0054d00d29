use serde::{Deserialize, Serialize};

use super::bits::{binary_encode, gray_decode, gray_encode, BitVector};
use super::CodecError;

/// How quantized integers become bit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// reflected binary (Gray) code
    #[default]
    Gray,
    /// plain base-2 code
    Binary,
}

impl Representation {
    pub fn encode(self, value: u64, width: usize) -> Result<BitVector, CodecError> {
        match self {
            Representation::Gray => gray_encode(value, width),
            Representation::Binary => binary_encode(value, width),
        }
    }

    pub fn decode(self, bits: &BitVector) -> u64 {
        match self {
            Representation::Gray => gray_decode(bits),
            Representation::Binary => bits.to_u64(),
        }
    }
}

/// The six flight-state attributes, in concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Lon,
    Lat,
    Alt,
    Vx,
    Vy,
    Vz,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Lon,
        Attribute::Lat,
        Attribute::Alt,
        Attribute::Vx,
        Attribute::Vy,
        Attribute::Vz,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Lon => "lon",
            Attribute::Lat => "lat",
            Attribute::Alt => "alt",
            Attribute::Vx => "vx",
            Attribute::Vy => "vy",
            Attribute::Vz => "vz",
        }
    }

    pub fn is_velocity(self) -> bool {
        matches!(self, Attribute::Vx | Attribute::Vy | Attribute::Vz)
    }
}

impl std::fmt::Display for Attribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Quantization steps per attribute.
///
/// Velocities are signed quantities (vx is negative on westbound legs, vz in
/// every descent) while quantized values are unsigned, so velocity integers
/// carry an additive offset. With the default offset of 1024 an 11-bit
/// velocity field covers -1024..=1023 km/h. Positions carry no offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantizationSpec {
    /// degrees
    pub lon_step: f64,
    /// degrees
    pub lat_step: f64,
    /// meters
    pub alt_step: f64,
    /// km/h
    pub vel_step: f64,
    /// quantization units added to every velocity integer
    pub vel_offset: i64,
}

impl Default for QuantizationSpec {
    fn default() -> Self {
        Self {
            lon_step: 0.001,
            lat_step: 0.001,
            alt_step: 10.0,
            vel_step: 1.0,
            vel_offset: 1024,
        }
    }
}

impl QuantizationSpec {
    pub fn validate(&self) -> Result<(), CodecError> {
        for (name, step) in [
            ("lon_step", self.lon_step),
            ("lat_step", self.lat_step),
            ("alt_step", self.alt_step),
            ("vel_step", self.vel_step),
        ] {
            if !(step.is_finite() && step > 0.0) {
                return Err(CodecError::InvalidSpec(format!(
                    "{name} must be finite and strictly positive, got {step}"
                )));
            }
        }
        if self.vel_offset < 0 {
            return Err(CodecError::InvalidSpec(format!(
                "vel_offset must be nonnegative, got {}",
                self.vel_offset
            )));
        }
        Ok(())
    }

    pub fn step(&self, attr: Attribute) -> f64 {
        match attr {
            Attribute::Lon => self.lon_step,
            Attribute::Lat => self.lat_step,
            Attribute::Alt => self.alt_step,
            Attribute::Vx | Attribute::Vy | Attribute::Vz => self.vel_step,
        }
    }

    pub fn offset(&self, attr: Attribute) -> i64 {
        if attr.is_velocity() {
            self.vel_offset
        } else {
            0
        }
    }
}

/// Bit widths of the per-attribute input codes and the signed differential
/// output codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BitWidthSpec {
    /// lon, lat, alt, vx, vy, vz
    pub input: [usize; 6],
    /// d_lon, d_lat, d_alt, d_vx, d_vy, d_vz; each includes one sign bit
    pub diff: [usize; 6],
}

pub const INPUT_WIDTH: usize = 78;
pub const DIFF_WIDTH: usize = 48;

impl Default for BitWidthSpec {
    fn default() -> Self {
        Self {
            input: [18, 16, 11, 11, 11, 11],
            diff: [8, 8, 8, 9, 9, 6],
        }
    }
}

impl BitWidthSpec {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.input_total() != INPUT_WIDTH {
            return Err(CodecError::InvalidSpec(format!(
                "input widths must sum to {INPUT_WIDTH}, got {}",
                self.input_total()
            )));
        }
        if self.diff_total() != DIFF_WIDTH {
            return Err(CodecError::InvalidSpec(format!(
                "differential widths must sum to {DIFF_WIDTH}, got {}",
                self.diff_total()
            )));
        }
        if let Some(w) = self.diff.iter().find(|&&w| w < 2) {
            return Err(CodecError::InvalidSpec(format!(
                "differential width {w} leaves no magnitude bit"
            )));
        }
        if let Some(w) = self.input.iter().chain(&self.diff).find(|&&w| w == 0 || w > 62) {
            return Err(CodecError::InvalidSpec(format!("unsupported width {w}")));
        }
        Ok(())
    }

    pub fn input_width(&self, attr: Attribute) -> usize {
        self.input[attr.index()]
    }

    pub fn diff_width(&self, attr: Attribute) -> usize {
        self.diff[attr.index()]
    }

    pub fn input_total(&self) -> usize {
        self.input.iter().sum()
    }

    pub fn diff_total(&self) -> usize {
        self.diff.iter().sum()
    }

    pub fn input_offsets(&self) -> [usize; 6] {
        prefix_offsets(&self.input)
    }

    pub fn diff_offsets(&self) -> [usize; 6] {
        prefix_offsets(&self.diff)
    }

    /// Largest representable quantized value of an input attribute.
    pub fn input_max(&self, attr: Attribute) -> i64 {
        (1i64 << self.input_width(attr)) - 1
    }

    /// Largest representable differential magnitude of an attribute.
    pub fn diff_max(&self, attr: Attribute) -> i64 {
        (1i64 << (self.diff_width(attr) - 1)) - 1
    }
}

fn prefix_offsets(widths: &[usize; 6]) -> [usize; 6] {
    let mut out = [0; 6];
    let mut acc = 0;
    for (o, w) in out.iter_mut().zip(widths) {
        *o = acc;
        acc += w;
    }
    out
}
