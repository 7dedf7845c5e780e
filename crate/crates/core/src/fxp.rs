//! 16-bit fixed-point samples and the exact 64-bit accumulator.
//!
//! Every multiply in the datapath is `i16 x i16 -> i64` with no rounding, and
//! sums stay exact until a single requantization per output pixel. Rounding is
//! always round-half-to-even; overflow saturates at the 16-bit boundary and is
//! a hard error inside the accumulator.

use crate::error::{Error, Result};

/// Split of the 16-bit word into integer and fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FxpFormat {
    frac_bits: u8,
}

impl FxpFormat {
    pub const TOTAL_BITS: u32 = 16;
    /// 8 integer bits, 8 fraction bits.
    pub const Q8_8: FxpFormat = FxpFormat { frac_bits: 8 };

    pub fn new(frac_bits: u8) -> Result<Self> {
        if frac_bits > 15 {
            return Err(Error::InvalidFormat(frac_bits));
        }
        Ok(FxpFormat { frac_bits })
    }

    pub fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    /// Raw value of 1.0 (saturated for Q0.16-style formats that cannot reach it).
    pub fn one(self) -> Fxp {
        quantize(1.0, self)
    }

    pub fn max_real(self) -> f64 {
        i16::MAX as f64 / scale(self.frac_bits)
    }

    pub fn min_real(self) -> f64 {
        i16::MIN as f64 / scale(self.frac_bits)
    }
}

impl Default for FxpFormat {
    fn default() -> Self {
        FxpFormat::Q8_8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fxp {
    raw: i16,
    format: FxpFormat,
}

impl Fxp {
    pub fn from_raw(raw: i16, format: FxpFormat) -> Self {
        Fxp { raw, format }
    }

    pub fn zero(format: FxpFormat) -> Self {
        Fxp { raw: 0, format }
    }

    pub fn raw(self) -> i16 {
        self.raw
    }

    pub fn format(self) -> FxpFormat {
        self.format
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / scale(self.format.frac_bits)
    }

    /// Lift into the accumulator domain of a product (`2 * frac_bits`), exactly.
    /// This is how biases join a sum of products.
    pub fn widen(self) -> Accum {
        let f = self.format.frac_bits;
        Accum {
            raw: (self.raw as i64) << f,
            frac_bits: 2 * f,
        }
    }
}

/// Wide exact accumulator. `frac_bits` is twice the operand fraction width
/// after a multiply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Accum {
    raw: i64,
    frac_bits: u8,
}

impl Accum {
    pub fn new(raw: i64, frac_bits: u8) -> Self {
        Accum { raw, frac_bits }
    }

    pub fn zero(frac_bits: u8) -> Self {
        Accum { raw: 0, frac_bits }
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn frac_bits(self) -> u8 {
        self.frac_bits
    }
}

fn scale(frac_bits: u8) -> f64 {
    (1u32 << frac_bits) as f64
}

/// Round-half-to-even of a finite value. `core` has no float rounding, so
/// this splits into floor and fraction by hand; exact for |x| < 2^52.
fn round_half_even(x: f64) -> f64 {
    let trunc = x as i64 as f64;
    let floor = if trunc > x { trunc - 1.0 } else { trunc };
    let frac = x - floor;
    if frac > 0.5 || (frac == 0.5 && (floor as i64) % 2 != 0) {
        floor + 1.0
    } else {
        floor
    }
}

fn saturate(v: i64) -> i16 {
    v.clamp(i16::MIN as i64, i16::MAX as i64) as i16
}

/// Real number to 16-bit fixed point: round-half-to-even, then saturate.
/// NaN maps to zero.
pub fn quantize(x: f64, format: FxpFormat) -> Fxp {
    let scaled = x * scale(format.frac_bits);
    let raw = if scaled.is_nan() {
        0
    } else if scaled >= i16::MAX as f64 {
        i16::MAX
    } else if scaled <= i16::MIN as f64 {
        i16::MIN
    } else {
        round_half_even(scaled) as i16
    };
    Fxp { raw, format }
}

/// Exact PE multiply.
pub fn mul_exact(a: Fxp, b: Fxp) -> Result<Accum> {
    if a.format != b.format {
        return Err(Error::FormatMismatch {
            left: a.format.frac_bits,
            right: b.format.frac_bits,
        });
    }
    Ok(Accum {
        raw: a.raw as i64 * b.raw as i64,
        frac_bits: 2 * a.format.frac_bits,
    })
}

pub fn acc_add(acc: Accum, p: Accum) -> Result<Accum> {
    if acc.frac_bits != p.frac_bits {
        return Err(Error::FormatMismatch {
            left: acc.frac_bits,
            right: p.frac_bits,
        });
    }
    let raw = acc.raw.checked_add(p.raw).ok_or(Error::AccumOverflow)?;
    Ok(Accum {
        raw,
        frac_bits: acc.frac_bits,
    })
}

/// Write an accumulator back to a 16-bit word: arithmetic shift with
/// round-half-to-even, then saturate.
pub fn requantize(acc: Accum, format: FxpFormat) -> Fxp {
    Fxp {
        raw: requantize_raw(acc.raw, acc.frac_bits, format.frac_bits),
        format,
    }
}

pub(crate) fn requantize_raw(raw: i64, from_frac: u8, to_frac: u8) -> i16 {
    if from_frac <= to_frac {
        let wide = (raw as i128) << (to_frac - from_frac);
        return wide.clamp(i16::MIN as i128, i16::MAX as i128) as i16;
    }
    let shift = (from_frac - to_frac) as u32;
    let q = raw >> shift;
    let rem = raw - (q << shift);
    let half = 1i64 << (shift - 1);
    let rounded = if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    };
    saturate(rounded)
}
