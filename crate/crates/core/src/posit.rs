//! Parametric posit codec.
//!
//! A [`PositFormat`] fixes the word size `n` and exponent size `es`. Bit
//! patterns ([`PositBits`]) decode into a sign/scale/fraction triple
//! ([`DecodedPosit`]) and unrounded datapath results ([`UnroundedValue`])
//! encode back with round-to-nearest-even on the bit string, saturating at
//! maxpos/minpos.

use std::fmt;
use std::ops::{Mul, Neg};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PositError {
    #[error("invalid posit format P({n},{es}): need 2 <= n <= 32 and es <= 7")]
    InvalidFormat { n: u32, es: u32 },
    #[error("malformed format {0:?}, expected `n,es`")]
    MalformedFormat(String),
    #[error("bit pattern {bits:#x} does not fit in {n} bits")]
    BitsOutOfRange { bits: u64, n: u32 },
    #[error("malformed hex bit pattern {0:?}")]
    MalformedHex(String),
}

/// Sign of a value, `Pos` for +1 and `Neg` for -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Sign {
    #[default]
    Pos,
    Neg,
}

impl Sign {
    pub fn from_negative(negative: bool) -> Self {
        if negative {
            Sign::Neg
        } else {
            Sign::Pos
        }
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Neg
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Pos => '+',
            Sign::Neg => '-',
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_negative(self.is_negative() ^ rhs.is_negative())
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        Sign::from_negative(!self.is_negative())
    }
}

/// The `(n, es)` pair defining a posit encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PositFormat {
    n: u32,
    es: u32,
}

impl PositFormat {
    pub const MAX_BITS: u32 = 32;
    pub const MAX_ES: u32 = 7;

    pub fn new(n: u32, es: u32) -> Result<Self, PositError> {
        if !(2..=Self::MAX_BITS).contains(&n) || es > Self::MAX_ES {
            return Err(PositError::InvalidFormat { n, es });
        }
        Ok(PositFormat { n, es })
    }

    pub fn n(self) -> u32 {
        self.n
    }

    pub fn es(self) -> u32 {
        self.es
    }

    /// log2 of useed, i.e. `2^es`.
    pub fn useed_log2(self) -> u32 {
        1 << self.es
    }

    /// `useed = 2^(2^es)`. Exact in binary64 for every supported `es`.
    pub fn useed(self) -> f64 {
        2f64.powi(self.useed_log2() as i32)
    }

    /// Fraction bits kept after the hidden bit in a [`DecodedPosit`]:
    /// `max(1, n - es - 3)`, the longest mantissa field the format can carry.
    pub fn frac_width(self) -> u32 {
        (self.n as i32 - self.es as i32 - 3).max(1) as u32
    }

    /// Scale (power of two) of maxpos.
    pub fn scale_max(self) -> i32 {
        ((self.n - 2) << self.es) as i32
    }

    /// Scale of minpos.
    pub fn scale_min(self) -> i32 {
        -self.scale_max()
    }

    pub fn mask(self) -> u32 {
        ((1u64 << self.n) - 1) as u32
    }

    pub(crate) fn sign_mask(self) -> u32 {
        1 << (self.n - 1)
    }

    pub fn zero(self) -> PositBits {
        PositBits { fmt: self, bits: 0 }
    }

    pub fn nar(self) -> PositBits {
        PositBits { fmt: self, bits: self.sign_mask() }
    }

    pub fn one(self) -> PositBits {
        PositBits { fmt: self, bits: 1 << (self.n - 2) }
    }

    pub fn maxpos(self) -> PositBits {
        PositBits { fmt: self, bits: self.sign_mask() - 1 }
    }

    pub fn minpos(self) -> PositBits {
        PositBits { fmt: self, bits: 1 }
    }

    /// Every bit pattern of the format, in unsigned order.
    pub fn patterns(self) -> impl Iterator<Item = PositBits> {
        (0..=self.mask()).map(move |bits| PositBits { fmt: self, bits })
    }

    /// Nibbles used when printing a pattern of this format.
    pub fn hex_digits(self) -> usize {
        self.n.div_ceil(4) as usize
    }
}

impl fmt::Display for PositFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P({},{})", self.n, self.es)
    }
}

/// Parses the `n,es` notation used on the command line and in vector files.
impl FromStr for PositFormat {
    type Err = PositError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || PositError::MalformedFormat(s.to_string());
        let (n, es) = s.trim().split_once(',').ok_or_else(malformed)?;
        let n = n.trim().parse().map_err(|_| malformed())?;
        let es = es.trim().parse().map_err(|_| malformed())?;
        PositFormat::new(n, es)
    }
}

/// Quire width of a format: `16 n` bits.
pub fn quire_width(fmt: PositFormat) -> u32 {
    16 * fmt.n()
}

/// An `n`-bit posit pattern. Only the low `n` bits of `bits` are ever set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PositBits {
    fmt: PositFormat,
    bits: u32,
}

/// Raw field view of a normal posit, after two's complement for negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositFields {
    pub sign: Sign,
    /// Length `m` of the run of identical regime bits.
    pub regime_run: u32,
    pub k: i32,
    /// Exponent value with absent low bits read as zero.
    pub exponent: u32,
    pub exponent_len: u32,
    pub mantissa: u32,
    pub mantissa_len: u32,
}

impl PositBits {
    pub fn new(fmt: PositFormat, bits: u32) -> Result<Self, PositError> {
        if bits & !fmt.mask() != 0 {
            return Err(PositError::BitsOutOfRange { bits: bits as u64, n: fmt.n });
        }
        Ok(PositBits { fmt, bits })
    }

    /// Keeps the low `n` bits of `bits`.
    pub fn wrapping(fmt: PositFormat, bits: u32) -> Self {
        PositBits { fmt, bits: bits & fmt.mask() }
    }

    pub fn parse_hex(fmt: PositFormat, s: &str) -> Result<Self, PositError> {
        let t = s.trim();
        let t = t
            .strip_prefix("0x")
            .or_else(|| t.strip_prefix("0X"))
            .unwrap_or(t);
        let bits = u64::from_str_radix(t, 16).map_err(|_| PositError::MalformedHex(s.to_string()))?;
        if bits > fmt.mask() as u64 {
            return Err(PositError::BitsOutOfRange { bits, n: fmt.n });
        }
        Ok(PositBits { fmt, bits: bits as u32 })
    }

    pub fn fmt(self) -> PositFormat {
        self.fmt
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn is_zero(self) -> bool {
        self.bits == 0
    }

    pub fn is_nar(self) -> bool {
        self.bits == self.fmt.sign_mask()
    }

    /// The pattern read as an `n`-bit two's-complement integer.
    pub fn to_signed(self) -> i32 {
        let shift = 32 - self.fmt.n;
        ((self.bits << shift) as i32) >> shift
    }

    /// Two's complement over `n` bits. Zero and NaR are fixed points.
    pub fn negate(self) -> Self {
        PositBits::wrapping(self.fmt, self.bits.wrapping_neg())
    }

    pub fn fields(self) -> Option<PositFields> {
        if self.is_zero() || self.is_nar() {
            return None;
        }
        let n = self.fmt.n;
        let es = self.fmt.es;
        let negative = self.bits & self.fmt.sign_mask() != 0;
        let magnitude = if negative {
            self.negate().bits
        } else {
            self.bits
        };

        let body_len = n - 1;
        let body = magnitude & ((1u32 << body_len) - 1);
        let aligned = body << (32 - body_len);
        let regime_bit = aligned >> 31;
        let run = if regime_bit == 1 {
            (!aligned).leading_zeros()
        } else {
            aligned.leading_zeros()
        }
        .min(body_len);
        let k = if regime_bit == 1 {
            run as i32 - 1
        } else {
            -(run as i32)
        };

        let consumed = (run + 1).min(body_len);
        let rem = body_len - consumed;
        let tail = body & ((1u32 << rem) - 1);
        let exponent_len = es.min(rem);
        let mantissa_len = rem - exponent_len;
        let exponent = (tail >> mantissa_len) << (es - exponent_len);
        let mantissa = tail & ((1u32 << mantissa_len) - 1);

        Some(PositFields {
            sign: Sign::from_negative(negative),
            regime_run: run,
            k,
            exponent,
            exponent_len,
            mantissa,
            mantissa_len,
        })
    }

    pub fn decode(self) -> DecodedPosit {
        let fw = self.fmt.frac_width();
        if self.is_zero() {
            return DecodedPosit { is_zero: true, ..DecodedPosit::special(fw) };
        }
        if self.is_nar() {
            return DecodedPosit { is_nar: true, ..DecodedPosit::special(fw) };
        }
        let f = self.fields().expect("normal pattern");
        DecodedPosit {
            sign: f.sign,
            scale: f.k * self.fmt.useed_log2() as i32 + f.exponent as i32,
            frac: (1u64 << fw) | ((f.mantissa as u64) << (fw - f.mantissa_len)),
            frac_width: fw,
            is_zero: false,
            is_nar: false,
        }
    }

    /// Nearest binary64 value. Exact unless the scale leaves the binary64
    /// range (possible for large `es`). NaR maps to NaN.
    pub fn to_f64(self) -> f64 {
        let d = self.decode();
        if d.is_nar {
            return f64::NAN;
        }
        if d.is_zero {
            return 0.0;
        }
        let mag = ldexp(d.frac as f64, d.scale - d.frac_width as i32);
        if d.sign.is_negative() {
            -mag
        } else {
            mag
        }
    }

    /// Correctly rounded conversion from binary64. NaN and infinities map to NaR.
    pub fn from_f64(fmt: PositFormat, x: f64) -> Self {
        encode(&UnroundedValue::from_f64(x), fmt)
    }
}

impl fmt::Display for PositBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$x}", self.bits, width = self.fmt.hex_digits())
    }
}

pub(crate) fn ldexp(x: f64, exp: i32) -> f64 {
    // powi saturates for |exp| > 1023, so split large exponents.
    let mut x = x;
    let mut e = exp;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e)
}

/// Unpacked posit: `(-1)^sign * 2^scale * frac / 2^frac_width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedPosit {
    pub sign: Sign,
    pub scale: i32,
    /// `1.m` as fixed point with the hidden bit at position `frac_width`.
    pub frac: u64,
    pub frac_width: u32,
    pub is_zero: bool,
    pub is_nar: bool,
}

impl DecodedPosit {
    fn special(frac_width: u32) -> Self {
        DecodedPosit {
            sign: Sign::Pos,
            scale: 0,
            frac: 0,
            frac_width,
            is_zero: false,
            is_nar: false,
        }
    }

    pub fn is_normal(&self) -> bool {
        !self.is_zero && !self.is_nar
    }

    /// The exact value lifted for re-encoding (sticky clear).
    pub fn to_unrounded(&self) -> UnroundedValue {
        if self.is_nar {
            return UnroundedValue::nar();
        }
        if self.is_zero {
            return UnroundedValue::zero();
        }
        UnroundedValue::from_scaled(
            self.sign,
            self.frac as u128,
            self.scale as i64 - self.frac_width as i64,
            false,
        )
    }
}

/// A normalized result awaiting rounding: the value is
/// `(-1)^sign * mantissa * 2^(scale - width + 1)`, plus a positive amount
/// below one mantissa ulp when `sticky` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnroundedValue {
    pub sign: Sign,
    pub scale: i64,
    pub mantissa: u64,
    pub width: u32,
    pub sticky: bool,
    pub is_zero: bool,
    pub is_nar: bool,
}

impl UnroundedValue {
    pub const MAX_WIDTH: u32 = 64;

    pub fn zero() -> Self {
        UnroundedValue {
            sign: Sign::Pos,
            scale: 0,
            mantissa: 0,
            width: 0,
            sticky: false,
            is_zero: true,
            is_nar: false,
        }
    }

    pub fn nar() -> Self {
        UnroundedValue { is_zero: false, is_nar: true, ..Self::zero() }
    }

    /// Normalizes `magnitude * 2^lsb_exp`, narrowing to at most 64 mantissa
    /// bits. Bits dropped while narrowing are folded into `sticky`. A zero
    /// magnitude yields zero, so callers must not pass a zero magnitude with
    /// `sticky` set.
    pub fn from_scaled(sign: Sign, magnitude: u128, lsb_exp: i64, sticky: bool) -> Self {
        debug_assert!(magnitude != 0 || !sticky);
        if magnitude == 0 {
            return Self::zero();
        }
        let bitlen = 128 - magnitude.leading_zeros();
        let (mantissa, width, sticky) = if bitlen > Self::MAX_WIDTH {
            let drop = bitlen - Self::MAX_WIDTH;
            let lost = magnitude & ((1u128 << drop) - 1) != 0;
            ((magnitude >> drop) as u64, Self::MAX_WIDTH, sticky || lost)
        } else {
            (magnitude as u64, bitlen, sticky)
        };
        debug_assert!(!sticky || width == Self::MAX_WIDTH);
        UnroundedValue {
            sign,
            scale: lsb_exp + bitlen as i64 - 1,
            mantissa,
            width,
            sticky,
            is_zero: false,
            is_nar: false,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if !x.is_finite() {
            return Self::nar();
        }
        if x == 0.0 {
            return Self::zero();
        }
        let raw = x.to_bits();
        let sign = Sign::from_negative(raw >> 63 == 1);
        let biased = ((raw >> 52) & 0x7ff) as i64;
        let field = raw & ((1u64 << 52) - 1);
        let (mant, lsb_exp) = if biased == 0 {
            (field, -1074)
        } else {
            (field | (1u64 << 52), biased - 1075)
        };
        Self::from_scaled(sign, mant as u128, lsb_exp, false)
    }
}

/// Rounds `v` onto the posit lattice of `fmt`.
///
/// Rounding is round-to-nearest, ties-to-even on the unbounded bit string
/// (sign, regime, exponent, fraction, sticky), so when exponent bits fall
/// off the end the tie point sits at the midpoint pattern of the `n + 1`-bit
/// format. Magnitudes beyond maxpos give maxpos and nonzero magnitudes below
/// minpos give minpos; a nonzero value never rounds to zero or NaR.
pub fn encode(v: &UnroundedValue, fmt: PositFormat) -> PositBits {
    if v.is_nar {
        return fmt.nar();
    }
    if v.is_zero {
        return fmt.zero();
    }
    debug_assert!(v.width >= 1 && v.mantissa >> (v.width - 1) == 1);

    let n = fmt.n;
    let es = fmt.es;
    let magnitude_bits = if v.scale > fmt.scale_max() as i64 {
        fmt.maxpos().bits
    } else if v.scale < fmt.scale_min() as i64 {
        fmt.minpos().bits
    } else {
        let s = v.scale;
        let k = s.div_euclid(1 << es);
        let e = s.rem_euclid(1 << es) as u128;
        let (regime, regime_len) = if k >= 0 {
            (((1u128 << (k + 1)) - 1) << 1, (k + 2) as u32)
        } else {
            (1u128, (1 - k) as u32)
        };
        let frac_len = v.width - 1;
        let frac = (v.mantissa as u128) & ((1u128 << frac_len) - 1);
        let body = (((regime << es) | e) << frac_len) | frac;
        let body_len = regime_len + es + frac_len;
        let avail = n - 1;

        if body_len <= avail {
            debug_assert!(!v.sticky, "sticky set on a value narrower than the format");
            (body << (avail - body_len)) as u32
        } else {
            let drop = body_len - avail;
            let kept = (body >> drop) as u32;
            let guard = (body >> (drop - 1)) & 1 == 1;
            let rest = v.sticky || body & ((1u128 << (drop - 1)) - 1) != 0;
            let round_up = guard && (rest || kept & 1 == 1);
            let rounded = kept + round_up as u32;
            debug_assert!(rounded < fmt.sign_mask() && rounded != 0);
            rounded
        }
    };

    let p = PositBits { fmt, bits: magnitude_bits };
    if v.sign.is_negative() {
        p.negate()
    } else {
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p82() -> PositFormat {
        PositFormat::new(8, 2).unwrap()
    }

    #[test]
    fn format_bounds() {
        assert!(PositFormat::new(1, 0).is_err());
        assert!(PositFormat::new(33, 0).is_err());
        assert!(PositFormat::new(8, 8).is_err());
        assert!(PositFormat::new(2, 0).is_ok());
        assert!(PositFormat::new(4, 3).is_ok());
        assert_eq!(p82().useed(), 16.0);
        assert_eq!(p82().scale_max(), 24);
        assert_eq!(p82().frac_width(), 3);
        assert_eq!("16, 2".parse::<PositFormat>().unwrap(), PositFormat::new(16, 2).unwrap());
        assert!("16".parse::<PositFormat>().is_err());
    }

    #[test]
    fn decode_specials() {
        assert!(PositBits::new(p82(), 0x00).unwrap().decode().is_zero);
        assert!(PositBits::new(p82(), 0x80).unwrap().decode().is_nar);
    }

    #[test]
    fn decode_examples() {
        let one = PositBits::new(p82(), 0x40).unwrap().decode();
        assert_eq!(one.sign, Sign::Pos);
        assert_eq!(one.scale, 0);
        assert_eq!(one.frac, 1 << one.frac_width);
        assert_eq!(PositBits::new(p82(), 0x40).unwrap().to_f64(), 1.0);
        assert_eq!(PositBits::new(p82(), 0x60).unwrap().to_f64(), 16.0);
        assert_eq!(PositBits::new(p82(), 0x60).unwrap().decode().scale, 4);
        assert_eq!(PositBits::new(p82(), 0xC0).unwrap().to_f64(), -1.0);
        assert_eq!(PositBits::new(p82(), 0x01).unwrap().to_f64(), 2f64.powi(-24));
        assert_eq!(PositBits::new(p82(), 0x7F).unwrap().to_f64(), 2f64.powi(24));
    }

    #[test]
    fn fields_of_truncated_exponent() {
        // 0x7E in P(8,2): six regime ones, terminator, no exponent bits left.
        let f = PositBits::new(p82(), 0x7E).unwrap().fields().unwrap();
        assert_eq!((f.regime_run, f.k, f.exponent_len, f.exponent), (6, 5, 0, 0));
        // 0x7D: five ones, terminator, one exponent bit "1" -> e = 0b10.
        let f = PositBits::new(p82(), 0x7D).unwrap().fields().unwrap();
        assert_eq!((f.regime_run, f.k, f.exponent_len, f.exponent), (5, 4, 1, 2));
    }

    #[test]
    fn encode_examples() {
        let one = UnroundedValue::from_scaled(Sign::Pos, 1, 0, false);
        assert_eq!(encode(&one, p82()).bits(), 0x40);
        let big = UnroundedValue::from_scaled(Sign::Pos, 1, 26, false);
        assert_eq!(encode(&big, p82()).bits(), 0x7F);
        let tiny = UnroundedValue::from_scaled(Sign::Neg, 3, -80, false);
        assert_eq!(encode(&tiny, p82()), p82().minpos().negate());
        assert_eq!(encode(&UnroundedValue::zero(), p82()).bits(), 0);
        assert!(encode(&UnroundedValue::nar(), p82()).is_nar());
    }

    #[test]
    fn rounding_in_truncated_exponent_region() {
        // Between 2^20 (0x7E) and 2^24 (0x7F) the tie point is 2^22.
        let at = |e: i64| encode(&UnroundedValue::from_scaled(Sign::Pos, 1, e, false), p82()).bits();
        assert_eq!(at(21), 0x7E);
        assert_eq!(at(22), 0x7E); // tie, even pattern
        assert_eq!(at(23), 0x7F);
        let above_tie = UnroundedValue::from_scaled(Sign::Pos, (1 << 60) + 1, 22 - 60, false);
        assert_eq!(encode(&above_tie, p82()).bits(), 0x7F);
    }

    #[test]
    fn sticky_breaks_ties() {
        // 1 + 2^-4 sits halfway between 1.0 (0x40) and 1.125 (0x41) in P(8,2).
        let half = UnroundedValue::from_scaled(Sign::Pos, 0b10001, -4, false);
        assert_eq!(encode(&half, p82()).bits(), 0x40);
        let mut above = UnroundedValue::from_scaled(Sign::Pos, 0b10001u128 << 59, -63, false);
        above.sticky = true;
        assert_eq!(encode(&above, p82()).bits(), 0x41);
    }

    #[test]
    fn negate_examples() {
        let p = |b| PositBits::new(p82(), b).unwrap();
        assert_eq!(p(0x40).negate().bits(), 0xC0);
        assert_eq!(p(0x00).negate().bits(), 0x00);
        assert_eq!(p(0x80).negate().bits(), 0x80);
    }

    #[test]
    fn quire_widths() {
        assert_eq!(quire_width(PositFormat::new(16, 2).unwrap()), 256);
        assert_eq!(quire_width(p82()), 128);
        assert_eq!(quire_width(PositFormat::new(32, 2).unwrap()), 512);
    }

    #[test]
    fn hex_display_and_parse() {
        let f = PositFormat::new(13, 2).unwrap();
        let p = PositBits::new(f, 0x1a3).unwrap();
        assert_eq!(p.to_string(), "01a3");
        assert_eq!(PositBits::parse_hex(f, "0x01A3").unwrap(), p);
        assert!(PositBits::parse_hex(f, "2000").is_err());
        assert!(PositBits::parse_hex(f, "zz").is_err());
    }

    #[test]
    fn from_f64_is_exact_for_lattice_points() {
        for p in p82().patterns().filter(|p| !p.is_nar()) {
            assert_eq!(PositBits::from_f64(p82(), p.to_f64()), p);
        }
        assert_eq!(PositBits::from_f64(p82(), 1e30), p82().maxpos());
        assert!(PositBits::from_f64(p82(), f64::NAN).is_nar());
    }
}
