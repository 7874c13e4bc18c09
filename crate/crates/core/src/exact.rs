//! Exact dyadic rationals and decimal-string rounding.
//!
//! Every posit value, every binary64 value and every finite sum of their
//! products is a dyadic rational `m * 2^e`, so [`ExactValue`] only stores a
//! big integer and a power-of-two exponent. General decimal input (which is
//! not dyadic) is rounded through [`round_decimal`] via integer division.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::posit::{encode, ldexp, PositBits, PositFormat, Sign, UnroundedValue};

/// `mantissa * 2^exp`, canonical with an odd mantissa (or zero with
/// exponent 0), or NaR.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactValue {
    mantissa: BigInt,
    exp: i64,
    nar: bool,
}

impl ExactValue {
    pub fn zero() -> Self {
        ExactValue { mantissa: BigInt::zero(), exp: 0, nar: false }
    }

    pub fn one() -> Self {
        Self::from_parts(BigInt::one(), 0)
    }

    pub fn nar() -> Self {
        ExactValue { mantissa: BigInt::zero(), exp: 0, nar: true }
    }

    pub fn from_parts(mantissa: BigInt, exp: i64) -> Self {
        if mantissa.is_zero() {
            return Self::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        ExactValue { mantissa: mantissa >> tz, exp: exp + tz as i64, nar: false }
    }

    pub fn from_f64(x: f64) -> Self {
        let u = UnroundedValue::from_f64(x);
        Self::from_unrounded_exact(&u)
    }

    fn from_unrounded_exact(u: &UnroundedValue) -> Self {
        if u.is_nar {
            return Self::nar();
        }
        if u.is_zero {
            return Self::zero();
        }
        let m = BigInt::from(u.mantissa);
        let m = if u.sign.is_negative() { -m } else { m };
        Self::from_parts(m, u.scale - u.width as i64 + 1)
    }

    pub fn is_nar(&self) -> bool {
        self.nar
    }

    pub fn is_zero(&self) -> bool {
        !self.nar && self.mantissa.is_zero()
    }

    pub fn sign(&self) -> Sign {
        Sign::from_negative(self.mantissa.is_negative())
    }

    pub fn abs(&self) -> Self {
        ExactValue { mantissa: self.mantissa.abs(), ..self.clone() }
    }

    /// Numerator of the reduced fraction.
    pub fn numerator(&self) -> BigInt {
        if self.exp > 0 {
            &self.mantissa << self.exp as usize
        } else {
            self.mantissa.clone()
        }
    }

    /// Denominator of the reduced fraction, always a power of two.
    pub fn denominator(&self) -> BigInt {
        BigInt::one() << (-self.exp).max(0) as usize
    }

    /// Power of two of the most significant bit; `None` for zero and NaR.
    pub fn msb_exponent(&self) -> Option<i64> {
        if self.nar || self.mantissa.is_zero() {
            return None;
        }
        Some(self.exp + self.mantissa.bits() as i64 - 1)
    }

    /// Top 64 bits with the remainder folded into the sticky flag.
    pub fn to_unrounded(&self) -> UnroundedValue {
        if self.nar {
            return UnroundedValue::nar();
        }
        if self.mantissa.is_zero() {
            return UnroundedValue::zero();
        }
        let sign = self.sign();
        let (mant, lsb, sticky) = narrow_biguint(self.mantissa.magnitude(), self.exp);
        UnroundedValue::from_scaled(sign, mant as u128, lsb, sticky)
    }

    /// Single correctly rounded conversion onto `fmt`.
    pub fn round_to(&self, fmt: PositFormat) -> PositBits {
        encode(&self.to_unrounded(), fmt)
    }

    /// Nearest-ish binary64 (top 64 bits, truncated). NaR gives NaN.
    pub fn to_f64(&self) -> f64 {
        if self.nar {
            return f64::NAN;
        }
        if self.mantissa.is_zero() {
            return 0.0;
        }
        let (mant, lsb, _) = narrow_biguint(self.mantissa.magnitude(), self.exp);
        let lsb = lsb.clamp(i32::MIN as i64 / 2, i32::MAX as i64 / 2) as i32;
        let mag = ldexp(mant as f64, lsb);
        if self.mantissa.is_negative() {
            -mag
        } else {
            mag
        }
    }

    /// `|self| / |other|` as binary64, accurate for arbitrarily distant scales
    /// as long as the quotient itself is in range.
    pub fn abs_ratio(&self, other: &ExactValue) -> f64 {
        let (Some(ea), Some(eb)) = (self.msb_exponent(), other.msb_exponent()) else {
            return if self.is_zero() { 0.0 } else { f64::INFINITY };
        };
        let scale_a = ExactValue { exp: self.exp - ea, ..self.abs() };
        let scale_b = ExactValue { exp: other.exp - eb, ..other.abs() };
        let q = scale_a.to_f64() / scale_b.to_f64();
        let d = (ea - eb).clamp(-4000, 4000) as i32;
        ldexp(q, d)
    }

    /// Exact decimal expansion, e.g. `-0.0625`. NaR prints as `NaR`.
    pub fn to_decimal_string(&self) -> String {
        if self.nar {
            return "NaR".to_string();
        }
        let neg = self.mantissa.is_negative();
        let mag = self.mantissa.magnitude();
        let body = if self.exp >= 0 {
            (mag << self.exp as usize).to_str_radix(10)
        } else {
            let places = (-self.exp) as usize;
            let digits = (mag * BigUint::from(5u32).pow(places as u32)).to_str_radix(10);
            let digits = format!("{digits:0>width$}", width = places + 1);
            let (int, frac) = digits.split_at(digits.len() - places);
            format!("{int}.{}", frac.trim_end_matches('0'))
        };
        if neg {
            format!("-{body}")
        } else {
            body
        }
    }
}

pub(crate) fn narrow_biguint(mag: &BigUint, exp: i64) -> (u64, i64, bool) {
    let bits = mag.bits();
    if bits <= 64 {
        return (mag.to_u64().expect("fits"), exp, false);
    }
    let drop = bits - 64;
    let sticky = mag.trailing_zeros().unwrap_or(0) < drop;
    ((mag >> drop).to_u64().expect("fits"), exp + drop as i64, sticky)
}

impl From<PositBits> for ExactValue {
    fn from(p: PositBits) -> Self {
        Self::from_unrounded_exact(&p.decode().to_unrounded())
    }
}

impl PositBits {
    /// Exact rational value of the pattern; NaR maps to [`ExactValue::nar`].
    pub fn to_exact(self) -> ExactValue {
        ExactValue::from(self)
    }
}

impl Add for &ExactValue {
    type Output = ExactValue;

    fn add(self, rhs: &ExactValue) -> ExactValue {
        if self.nar || rhs.nar {
            return ExactValue::nar();
        }
        if self.mantissa.is_zero() {
            return rhs.clone();
        }
        if rhs.mantissa.is_zero() {
            return self.clone();
        }
        let exp = self.exp.min(rhs.exp);
        let a = &self.mantissa << (self.exp - exp) as usize;
        let b = &rhs.mantissa << (rhs.exp - exp) as usize;
        ExactValue::from_parts(a + b, exp)
    }
}

impl Add for ExactValue {
    type Output = ExactValue;

    fn add(self, rhs: ExactValue) -> ExactValue {
        &self + &rhs
    }
}

impl Neg for &ExactValue {
    type Output = ExactValue;

    fn neg(self) -> ExactValue {
        ExactValue { mantissa: -&self.mantissa, ..self.clone() }
    }
}

impl Neg for ExactValue {
    type Output = ExactValue;

    fn neg(self) -> ExactValue {
        -&self
    }
}

impl Sub for &ExactValue {
    type Output = ExactValue;

    fn sub(self, rhs: &ExactValue) -> ExactValue {
        self + &(-rhs)
    }
}

impl Sub for ExactValue {
    type Output = ExactValue;

    fn sub(self, rhs: ExactValue) -> ExactValue {
        &self - &rhs
    }
}

impl Mul for &ExactValue {
    type Output = ExactValue;

    fn mul(self, rhs: &ExactValue) -> ExactValue {
        if self.nar || rhs.nar {
            return ExactValue::nar();
        }
        // product of odd mantissas stays odd
        if self.mantissa.is_zero() || rhs.mantissa.is_zero() {
            return ExactValue::zero();
        }
        ExactValue {
            mantissa: &self.mantissa * &rhs.mantissa,
            exp: self.exp + rhs.exp,
            nar: false,
        }
    }
}

impl Mul for ExactValue {
    type Output = ExactValue;

    fn mul(self, rhs: ExactValue) -> ExactValue {
        &self * &rhs
    }
}

impl std::iter::Sum for ExactValue {
    fn sum<I: Iterator<Item = ExactValue>>(iter: I) -> Self {
        iter.fold(ExactValue::zero(), |acc, x| &acc + &x)
    }
}

/// Numeric order; `None` when either side is NaR.
impl PartialOrd for ExactValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.nar || other.nar {
            return if self.nar && other.nar { Some(Ordering::Equal) } else { None };
        }
        let d = self - other;
        Some(if d.mantissa.is_zero() {
            Ordering::Equal
        } else if d.mantissa.is_negative() {
            Ordering::Less
        } else {
            Ordering::Greater
        })
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed real number {0:?}")]
pub struct ParseRealError(pub String);

/// Rounds a decimal literal (`-1.25e-3`, `42`, `.5`) straight onto `fmt`
/// with one rounding. `nar`, `nan` and `inf` (any case, optional sign) give NaR.
pub fn round_decimal(s: &str, fmt: PositFormat) -> Result<PositBits, ParseRealError> {
    let t = s.trim();
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    if matches!(body.to_ascii_lowercase().as_str(), "nar" | "nan" | "inf" | "infinity") {
        return Ok(fmt.nar());
    }
    let err = || ParseRealError(s.to_string());
    let (mantissa, exp10) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i64>().map_err(|_| err())?),
        None => (body, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int}{frac}");
    let num = BigUint::parse_bytes(digits.as_bytes(), 10).ok_or_else(err)?;
    let exp10 = exp10 - frac.len() as i64;
    if exp10.unsigned_abs() > 100_000 {
        return Err(err());
    }
    let ten_pow = BigUint::from(10u32).pow(exp10.unsigned_abs() as u32);
    let (num, den) = if exp10 >= 0 {
        (num * ten_pow, BigUint::one())
    } else {
        (num, ten_pow)
    };
    Ok(round_ratio(Sign::from_negative(neg), &num, &den, fmt))
}

/// Rounds `sign * num / den` onto `fmt` with a single rounding.
pub fn round_ratio(sign: Sign, num: &BigUint, den: &BigUint, fmt: PositFormat) -> PositBits {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return fmt.zero();
    }
    // quotient with at least 66 significant bits
    let shift = 66 + den.bits() as i64 - num.bits() as i64;
    let (q, r) = if shift >= 0 {
        (num << shift as usize).div_rem(den)
    } else {
        num.div_rem(&(den << (-shift) as usize))
    };
    let (mant, lsb, sticky) = narrow_biguint(&q, -shift);
    let v = UnroundedValue::from_scaled(sign, mant as u128, lsb, sticky || !r.is_zero());
    encode(&v, fmt)
}

/// Signed big integer helper used by aligned-term views.
pub(crate) fn signed_from_twos(bits: &BigUint, width: u32) -> BigInt {
    if bits.bit(width as u64 - 1) {
        BigInt::from_biguint(BigSign::Minus, (BigUint::one() << width as usize) - bits)
    } else {
        BigInt::from_biguint(BigSign::Plus, bits.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p82() -> PositFormat {
        PositFormat::new(8, 2).unwrap()
    }

    #[test]
    fn to_exact_examples() {
        let one = PositBits::new(p82(), 0x40).unwrap().to_exact();
        assert_eq!(one, ExactValue::one());
        assert_eq!(one.numerator(), BigInt::one());
        assert_eq!(one.denominator(), BigInt::one());
        let zero = PositBits::new(p82(), 0x00).unwrap().to_exact();
        assert!(zero.is_zero());
        assert_eq!(zero.denominator(), BigInt::one());
        let minpos = PositBits::new(p82(), 0x01).unwrap().to_exact();
        assert_eq!(minpos.numerator(), BigInt::one());
        assert_eq!(minpos.denominator(), BigInt::from(16_777_216u64));
        assert!(p82().nar().to_exact().is_nar());
    }

    #[test]
    fn arithmetic() {
        let a = ExactValue::from_f64(1.5);
        let b = ExactValue::from_f64(-0.25);
        assert_eq!((&a + &b).to_f64(), 1.25);
        assert_eq!((&a * &b).to_f64(), -0.375);
        assert!((&a - &a).is_zero());
        assert!(a > b);
        assert!((&a + &ExactValue::nar()).is_nar());
    }

    #[test]
    fn decimal_strings() {
        assert_eq!(ExactValue::from_f64(-0.0625).to_decimal_string(), "-0.0625");
        assert_eq!(ExactValue::from_f64(48.0).to_decimal_string(), "48");
        assert_eq!(ExactValue::from_f64(0.5).to_decimal_string(), "0.5");
        assert_eq!(ExactValue::zero().to_decimal_string(), "0");
    }

    #[test]
    fn decimal_rounding() {
        let f = p82();
        assert_eq!(round_decimal("1.0", f).unwrap().bits(), 0x40);
        assert_eq!(round_decimal("0", f).unwrap().bits(), 0x00);
        assert_eq!(round_decimal("-0.0", f).unwrap().bits(), 0x00);
        assert_eq!(round_decimal("1e30", f).unwrap(), f.maxpos());
        assert_eq!(round_decimal("-1e-300", f).unwrap(), f.minpos().negate());
        assert!(round_decimal("NaR", f).unwrap().is_nar());
        assert!(round_decimal("1.2.3", f).is_err());
        assert!(round_decimal("", f).is_err());
        assert!(round_decimal("e5", f).is_err());
        // 1.0625 is the exact tie between 1.0 and 1.125; 1.0625000001 is above it.
        assert_eq!(round_decimal("1.0625", f).unwrap().bits(), 0x40);
        assert_eq!(round_decimal("1.0625000001", f).unwrap().bits(), 0x41);
    }

    #[test]
    fn ratio_across_scales() {
        let a = ExactValue::from_parts(BigInt::from(3), -5000);
        let b = ExactValue::from_parts(BigInt::from(1), -5001);
        assert_eq!(a.abs_ratio(&b), 6.0);
    }
}
