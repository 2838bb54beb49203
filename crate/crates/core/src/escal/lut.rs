use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// One sine-table word: a sign bit above an unsigned magnitude.
///
/// For a `bits`-wide entry the magnitude has `bits - 1` bits and unity sits at
/// `2^(bits - 2)`, so a 17-bit entry stores +-1.0 exactly as `32768`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LutEntry {
    word: u32,
    bits: u32,
}

impl LutEntry {
    pub fn encode(value: f64, bits: u32) -> Self {
        let unit = f64::from(1u32 << (bits - 2));
        let max_mag = (1u32 << (bits - 1)) - 1;
        let mag = libm::round(libm::fabs(value) * unit).min(f64::from(max_mag)) as u32;
        let sign = u32::from(value < 0.0 && mag != 0);
        Self {
            word: (sign << (bits - 1)) | mag,
            bits,
        }
    }

    /// The raw sign-magnitude word.
    pub fn word(&self) -> u32 {
        self.word
    }

    /// Two's-complement integer value, scaled by `2^(bits - 2)`.
    pub fn signed(&self) -> i32 {
        let mag = (self.word & ((1u32 << (self.bits - 1)) - 1)) as i32;
        if self.word >> (self.bits - 1) & 1 == 1 {
            -mag
        } else {
            mag
        }
    }

    pub fn value(&self) -> f64 {
        f64::from(self.signed()) / f64::from(1u32 << (self.bits - 2))
    }
}

/// One period of a quantized sine.
#[derive(Debug, Clone, PartialEq)]
pub struct Lut {
    entries: Vec<LutEntry>,
    unit_bits: u32,
}

impl Lut {
    pub fn new(len: usize, entry_bits: u32) -> Result<Self> {
        if len < 4 {
            return Err(Error::Config(alloc::format!(
                "LUT needs at least 4 entries, got {len}"
            )));
        }
        if !(3..=24).contains(&entry_bits) {
            return Err(Error::Config(alloc::format!(
                "LUT entry width must be 3..=24 bits, got {entry_bits}"
            )));
        }
        let entries = (0..len)
            .map(|i| LutEntry::encode(libm::sin(2.0 * PI * i as f64 / len as f64), entry_bits))
            .collect();
        Ok(Self {
            entries,
            unit_bits: entry_bits - 2,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<LutEntry> {
        self.entries
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.entries.len(),
            })
    }

    /// Signed integer at `index` (wrapped), scaled by `2^unit_bits`.
    #[inline]
    pub(crate) fn raw(&self, index: usize) -> i32 {
        self.entries[index % self.entries.len()].signed()
    }

    pub fn unit_bits(&self) -> u32 {
        self.unit_bits
    }
}
