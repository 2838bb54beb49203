use crate::beamformer::QWord;

/// Q15.16 word used inside the loop datapath (HPF, multiplier, accumulator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fx(i32);

impl Fx {
    pub const FRAC_BITS: u32 = 16;
    pub const ZERO: Fx = Fx(0);
    pub const ONE: Fx = Fx(1 << 16);

    pub const fn from_raw(raw: i32) -> Self {
        Fx(raw)
    }

    pub const fn raw(self) -> i32 {
        self.0
    }

    pub fn from_f64(x: f64) -> Self {
        Self::saturate(libm::round(x * 65536.0) as i64).0
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / 65536.0
    }

    /// Widens a `QWord` (10 fractional bits) without loss.
    pub fn from_qword(q: QWord) -> Self {
        Fx(i32::from(q.raw()) << (Self::FRAC_BITS - QWord::FRAC_BITS))
    }

    /// Clamps a wide intermediate into the word; the flag reports clipping.
    pub fn saturate(v: i64) -> (Self, bool) {
        if v > i64::from(i32::MAX) {
            (Fx(i32::MAX), true)
        } else if v < i64::from(i32::MIN) {
            (Fx(i32::MIN), true)
        } else {
            (Fx(v as i32), false)
        }
    }
}

/// `v / 2^bits`, rounding half away from zero.
#[inline]
pub(crate) fn shift_round(v: i64, bits: u32) -> i64 {
    if bits == 0 {
        return v;
    }
    let half = 1i64 << (bits - 1);
    if v >= 0 {
        (v + half) >> bits
    } else {
        -((-v + half) >> bits)
    }
}
