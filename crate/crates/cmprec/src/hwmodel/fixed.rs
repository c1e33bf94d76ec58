//! Two's complement fixed-point arithmetic with explicit word formats.
//!
//! Everything here operates on raw integer words: a value `v` stored in
//! format Q(t, f) is the integer `round(v * 2^f)` held in a `t`-bit signed
//! word. All intermediate math runs in wide integers, so results are exact
//! up to the documented rounding points and identical on every platform.
//! Rounding and overflow behavior travel with the format: truncation toward
//! negative infinity or round-to-nearest-even at requantization points,
//! saturation or wraparound when a word overflows.

use crate::C64;

/// How requantization resolves the discarded fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    /// Drop the bits, i.e. round toward negative infinity. This is what a
    /// plain arithmetic right shift does in hardware.
    Truncate,
    /// Round to the nearest representable value, ties to the even word.
    NearestEven,
}

/// What happens when a result exceeds the word range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overflow {
    /// Clamp to the most positive or most negative representable word.
    Saturate,
    /// Keep the low bits, two's complement style.
    Wrap,
}

/// A signed fixed-point word description: total width, fraction bits, and
/// the rounding and overflow policies applied when values enter the format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QFormatSpec {
    /// Total word width in bits, including the sign.
    pub total_bits: u32,
    /// Fraction bits; the represented value is `raw / 2^frac_bits`.
    pub frac_bits: u32,
    /// Rounding applied when fraction bits are discarded.
    pub rounding: Rounding,
    /// Overflow policy applied when a result leaves the word range.
    pub overflow: Overflow,
}

impl QFormatSpec {
    /// Builds a format, enforcing `1 <= frac_bits < total_bits <= 32`.
    pub fn new(total_bits: u32, frac_bits: u32, rounding: Rounding, overflow: Overflow) -> Self {
        assert!(
            (1..total_bits).contains(&frac_bits) && total_bits <= 32,
            "need 1 <= frac_bits < total_bits <= 32, got Q({total_bits},{frac_bits})"
        );
        Self {
            total_bits,
            frac_bits,
            rounding,
            overflow,
        }
    }

    /// Largest representable raw word, `2^(total-1) - 1`.
    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Smallest representable raw word, `-2^(total-1)`.
    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// The value of one least significant bit, `2^-frac_bits`.
    pub fn lsb(&self) -> f64 {
        (self.frac_bits as f64 * -1.0).exp2()
    }

    fn apply_overflow(&self, wide: i128) -> i64 {
        let min = self.min_raw() as i128;
        let max = self.max_raw() as i128;
        match self.overflow {
            Overflow::Saturate => wide.clamp(min, max) as i64,
            Overflow::Wrap => {
                let span = 1i128 << self.total_bits;
                ((wide - min).rem_euclid(span) + min) as i64
            }
        }
    }
}

/// Encodes a real value into a raw word of the given format. The value must
/// be finite; rounding and overflow follow the format's policies.
pub fn fx_encode(spec: QFormatSpec, v: f64) -> i64 {
    assert!(v.is_finite(), "cannot encode non-finite value {v}");
    let scaled = v * (spec.frac_bits as f64).exp2();
    // Clamp in the float domain first so the integer cast below is always
    // in range; only absurdly large inputs are affected, and for those the
    // saturation (or wrap of a saturated word) is the documented behavior.
    let bounded = scaled.clamp(-(2f64.powi(62)), 2f64.powi(62));
    let rounded = match spec.rounding {
        Rounding::Truncate => bounded.floor(),
        Rounding::NearestEven => bounded.round_ties_even(),
    };
    spec.apply_overflow(rounded as i128)
}

/// Decodes a raw word back to a real value, `raw / 2^frac_bits`.
pub fn fx_decode(spec: QFormatSpec, raw: i64) -> f64 {
    raw as f64 * spec.lsb()
}

/// Moves a raw word from one fraction position to another, rounding per the
/// target format when bits are discarded and applying its overflow policy.
/// The wide input type lets exact products feed straight in.
pub fn fx_requantize_wide(raw: i128, from_frac: u32, to: QFormatSpec) -> i64 {
    let shifted: i128 = if from_frac > to.frac_bits {
        let shift = from_frac - to.frac_bits;
        let floor = raw >> shift;
        match to.rounding {
            Rounding::Truncate => floor,
            Rounding::NearestEven => {
                let rem = raw - (floor << shift);
                let half = 1i128 << (shift - 1);
                if rem > half || (rem == half && (floor & 1) != 0) {
                    floor + 1
                } else {
                    floor
                }
            }
        }
    } else {
        raw << (to.frac_bits - from_frac)
    };
    to.apply_overflow(shifted)
}

/// [`fx_requantize_wide`] for ordinary raw words.
pub fn fx_requantize(raw: i64, from_frac: u32, to: QFormatSpec) -> i64 {
    fx_requantize_wide(raw as i128, from_frac, to)
}

/// Sum of two raw words in the same format, with its overflow policy.
pub fn fx_add(spec: QFormatSpec, a: i64, b: i64) -> i64 {
    spec.apply_overflow(a as i128 + b as i128)
}

/// Difference of two raw words in the same format.
pub fn fx_sub(spec: QFormatSpec, a: i64, b: i64) -> i64 {
    spec.apply_overflow(a as i128 - b as i128)
}

/// Negation of a raw word; saturates (or wraps) when negating the most
/// negative word.
pub fn fx_neg(spec: QFormatSpec, a: i64) -> i64 {
    spec.apply_overflow(-(a as i128))
}

/// A complex value held as a pair of raw words; the format lives in the
/// surrounding context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FxComplex {
    /// Real part, raw.
    pub re: i64,
    /// Imaginary part, raw.
    pub im: i64,
}

impl FxComplex {
    /// Both components zero, which is exact in every format.
    pub const ZERO: FxComplex = FxComplex { re: 0, im: 0 };

    /// Encodes a complex value componentwise.
    pub fn encode(spec: QFormatSpec, z: C64) -> Self {
        Self {
            re: fx_encode(spec, z.re),
            im: fx_encode(spec, z.im),
        }
    }

    /// Decodes back to floating point componentwise.
    pub fn decode(self, spec: QFormatSpec) -> C64 {
        C64::new(fx_decode(spec, self.re), fx_decode(spec, self.im))
    }

    /// Componentwise requantization into another fraction position.
    pub fn requantize(self, from_frac: u32, to: QFormatSpec) -> Self {
        Self {
            re: fx_requantize(self.re, from_frac, to),
            im: fx_requantize(self.im, from_frac, to),
        }
    }

    /// Complex conjugate in the given format.
    pub fn conj(self, spec: QFormatSpec) -> Self {
        Self {
            re: self.re,
            im: fx_neg(spec, self.im),
        }
    }

    /// Componentwise negation in the given format.
    pub fn neg(self, spec: QFormatSpec) -> Self {
        Self {
            re: fx_neg(spec, self.re),
            im: fx_neg(spec, self.im),
        }
    }
}

/// Componentwise complex addition in one format.
pub fn fx_cadd(spec: QFormatSpec, a: FxComplex, b: FxComplex) -> FxComplex {
    FxComplex {
        re: fx_add(spec, a.re, b.re),
        im: fx_add(spec, a.im, b.im),
    }
}

/// Componentwise complex subtraction in one format.
pub fn fx_csub(spec: QFormatSpec, a: FxComplex, b: FxComplex) -> FxComplex {
    FxComplex {
        re: fx_sub(spec, a.re, b.re),
        im: fx_sub(spec, a.im, b.im),
    }
}

/// Full complex multiply with inputs at two fraction positions. The four
/// real products are computed exactly in wide integers, requantized one by
/// one into the output format, and then combined with that format's
/// saturating adds. This fixes the internal evaluation order, which is what
/// makes the datapath bit-reproducible.
pub fn fx_cmul(a: FxComplex, a_frac: u32, b: FxComplex, b_frac: u32, out: QFormatSpec) -> FxComplex {
    let pf = a_frac + b_frac;
    let rr = fx_requantize_wide(a.re as i128 * b.re as i128, pf, out);
    let ii = fx_requantize_wide(a.im as i128 * b.im as i128, pf, out);
    let ri = fx_requantize_wide(a.re as i128 * b.im as i128, pf, out);
    let ir = fx_requantize_wide(a.im as i128 * b.re as i128, pf, out);
    FxComplex {
        re: fx_sub(out, rr, ii),
        im: fx_add(out, ri, ir),
    }
}

/// Multiplies a raw word by a small signed constant mantissa with its own
/// implied fraction, then requantizes back to the word's format. This is the
/// shape of the projection unit's constant multipliers.
pub fn fx_mul_const(raw: i64, mantissa: i64, mantissa_frac: u32, fmt: QFormatSpec) -> i64 {
    fx_requantize_wide(raw as i128 * mantissa as i128, fmt.frac_bits + mantissa_frac, fmt)
}

/// The word formats of the iteration datapath.
///
/// Formats are quoted as Q(total, frac): transmit vector Q(14,8), scaled
/// vector tau*x Q(14,13), channel entries Q(11,8), the first product's
/// accumulators Q(18,15), the second product's accumulators Q(18,11), and
/// the adder tree that folds per-array partial sums Q(21,15). Projection
/// constants are 5-bit signed mantissas with per-constant exponents. The
/// projection unit itself operates on Q(18,11) words, i.e. in `mac_z_fmt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointProfile {
    /// Transmit vector entries.
    pub x_fmt: QFormatSpec,
    /// Step-scaled vector entries `tau * x`.
    pub taux_fmt: QFormatSpec,
    /// Channel stack entries.
    pub h_fmt: QFormatSpec,
    /// Accumulators of the first matrix-vector product.
    pub mac_w_fmt: QFormatSpec,
    /// Accumulators of the second matrix-vector product and the projection
    /// datapath.
    pub mac_z_fmt: QFormatSpec,
    /// Adder tree combining per-array partial sums.
    pub adder_tree_fmt: QFormatSpec,
    /// Width of the projection constant mantissas.
    pub proj_const_bits: u32,
}

impl FixedPointProfile {
    /// The datapath profile with a chosen rounding and overflow policy
    /// applied to every stage.
    pub fn with_modes(rounding: Rounding, overflow: Overflow) -> Self {
        let q = |t, f| QFormatSpec::new(t, f, rounding, overflow);
        Self {
            x_fmt: q(14, 8),
            taux_fmt: q(14, 13),
            h_fmt: q(11, 8),
            mac_w_fmt: q(18, 15),
            mac_z_fmt: q(18, 11),
            adder_tree_fmt: q(21, 15),
            proj_const_bits: 5,
        }
    }
}

impl Default for FixedPointProfile {
    /// Truncating, saturating datapath: the cheapest hardware realization.
    fn default() -> Self {
        Self::with_modes(Rounding::Truncate, Overflow::Saturate)
    }
}
