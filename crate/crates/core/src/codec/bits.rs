//! Fixed-width bit vectors with plain binary and reflected Gray code
//! conversions.

use std::fmt;
use std::str::FromStr;

use super::CodecError;

/// Widest vector that still converts to a `u64`.
pub const MAX_WIDTH: usize = 64;

/// Ordered binary digits, most significant bit first. Leading zeros are kept.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    pub fn zeros(width: usize) -> Self {
        Self { bits: vec![0; width] }
    }

    /// Builds a vector from explicit digits; anything other than 0 or 1 is rejected.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self, CodecError> {
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(CodecError::InvalidBit(bad as char));
        }
        Ok(Self { bits })
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Digit at MSB-first position `idx`.
    pub fn get(&self, idx: usize) -> u8 {
        self.bits[idx]
    }

    pub fn set(&mut self, idx: usize, bit: bool) {
        self.bits[idx] = bit as u8;
    }

    /// Digit at LSB-first position `idx` (bit 0 is the least significant).
    pub fn lsb(&self, idx: usize) -> u8 {
        self.bits[self.bits.len() - 1 - idx]
    }

    /// Returns a copy with the LSB-first bit `idx` inverted.
    pub fn with_lsb_flipped(&self, idx: usize) -> Self {
        let mut out = self.clone();
        let pos = out.bits.len() - 1 - idx;
        out.bits[pos] ^= 1;
        out
    }

    /// Interprets the digits as an unsigned base-2 integer.
    pub fn to_u64(&self) -> u64 {
        debug_assert!(self.width() <= MAX_WIDTH);
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn slice(&self, offset: usize, width: usize) -> BitVector {
        BitVector {
            bits: self.bits[offset..offset + width].to_vec(),
        }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitVector>) -> BitVector {
        let mut bits = Vec::new();
        for p in parts {
            bits.extend_from_slice(&p.bits);
        }
        BitVector { bits }
    }

    /// Digits as `0.0`/`1.0` values, the form the network consumes.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({})", self)
    }
}

/// Parses a string of '0'/'1' characters. Spaces and underscores are
/// treated as visual separators and skipped.
impl FromStr for BitVector {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                ' ' | '_' => {}
                other => return Err(CodecError::InvalidBit(other)),
            }
        }
        Ok(Self { bits })
    }
}

/// Base-2 representation of `value`, zero padded to `width` digits.
pub fn binary_encode(value: u64, width: usize) -> Result<BitVector, CodecError> {
    if width == 0 || width > MAX_WIDTH {
        return Err(CodecError::InvalidWidth(width));
    }
    if width < MAX_WIDTH && value >> width != 0 {
        return Err(CodecError::Overflow { value, width });
    }
    let bits = (0..width)
        .rev()
        .map(|shift| ((value >> shift) & 1) as u8)
        .collect();
    Ok(BitVector { bits })
}

/// `g = b XOR (b >> 1)`, evaluated digit by digit.
pub fn gray_from_binary(b: &BitVector) -> BitVector {
    let bits = b
        .bits
        .iter()
        .enumerate()
        .map(|(i, &bit)| if i == 0 { bit } else { bit ^ b.bits[i - 1] })
        .collect();
    BitVector { bits }
}

/// Prefix XOR scan from the MSB; inverse of [`gray_from_binary`].
pub fn binary_from_gray(g: &BitVector) -> BitVector {
    let mut acc = 0u8;
    let bits = g
        .bits
        .iter()
        .map(|&bit| {
            acc ^= bit;
            acc
        })
        .collect();
    BitVector { bits }
}

/// Gray code of `value` on `width` digits.
pub fn gray_encode(value: u64, width: usize) -> Result<BitVector, CodecError> {
    binary_encode(value, width).map(|b| gray_from_binary(&b))
}

/// Integer carried by a Gray-coded vector.
pub fn gray_decode(g: &BitVector) -> u64 {
    binary_from_gray(g).to_u64()
}

/// Number of positions at which two equal-width vectors differ.
pub fn hamming_distance(a: &BitVector, b: &BitVector) -> Result<usize, CodecError> {
    if a.width() != b.width() {
        return Err(CodecError::WidthMismatch {
            expected: a.width(),
            actual: b.width(),
        });
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    #[test]
    fn binary_encode_examples() {
        assert_eq!(binary_encode(100, 8).unwrap(), bv("0110 0100"));
        assert_eq!(binary_encode(0, 8).unwrap(), bv("0000 0000"));
        assert_eq!(binary_encode(255, 8).unwrap(), bv("1111 1111"));
        assert!(matches!(
            binary_encode(256, 8),
            Err(CodecError::Overflow { value: 256, width: 8 })
        ));
        assert!(binary_encode(1, 0).is_err());
    }

    #[test]
    fn gray_examples() {
        assert_eq!(gray_from_binary(&BitVector::zeros(11)), BitVector::zeros(11));
        assert_eq!(gray_from_binary(&bv("0110 0100")), bv("0101 0110"));
        assert_eq!(binary_from_gray(&bv("0101 0110")), bv("0110 0100"));
        assert_eq!(binary_from_gray(&BitVector::zeros(5)), BitVector::zeros(5));

        let g779 = gray_encode(779, 10).unwrap();
        let g780 = gray_encode(780, 10).unwrap();
        assert_eq!(g779, bv("1010001110"));
        assert_eq!(g780, bv("1010001010"));
        assert_eq!(hamming_distance(&g779, &g780).unwrap(), 1);
    }

    #[test]
    fn display_and_parse() {
        let b = binary_encode(5, 6).unwrap();
        assert_eq!(b.to_string(), "000101");
        assert_eq!(b.to_string().parse::<BitVector>().unwrap(), b);
        assert!("01x".parse::<BitVector>().is_err());
        assert!(BitVector::from_bits(vec![0, 2]).is_err());
    }

    #[test]
    fn lsb_indexing() {
        let b = binary_encode(100, 8).unwrap();
        assert_eq!(b.lsb(2), 1);
        assert_eq!(b.lsb(0), 0);
        assert_eq!(b.with_lsb_flipped(7).to_u64(), 228);
        assert_eq!(b.with_lsb_flipped(0).to_u64(), 101);
    }
}
