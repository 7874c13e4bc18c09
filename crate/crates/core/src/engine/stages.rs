//! The six datapath stages of the fused engine as pure functions.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use super::csa::{csa_compress, CsaPair};
use super::{DotError, PdpuConfig};
use crate::exact::{narrow_biguint, signed_from_twos};
use crate::posit::{encode, DecodedPosit, PositBits, PositFormat, Sign, UnroundedValue};

/// S1 output: decoded operands plus product signs and exponents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeStage {
    pub a: Vec<DecodedPosit>,
    pub b: Vec<DecodedPosit>,
    pub acc: DecodedPosit,
    pub s_ab: Vec<Sign>,
    pub e_ab: Vec<i32>,
    pub nar: bool,
}

pub fn s1_decode(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<DecodeStage, DotError> {
    cfg.check_operands(va, vb, acc)?;
    let a: Vec<DecodedPosit> = va.iter().map(|p| p.decode()).collect();
    let b: Vec<DecodedPosit> = vb.iter().map(|p| p.decode()).collect();
    let acc = acc.decode();
    let s_ab = a.iter().zip(&b).map(|(x, y)| x.sign * y.sign).collect();
    let e_ab = a.iter().zip(&b).map(|(x, y)| x.scale + y.scale).collect();
    let nar = acc.is_nar || a.iter().chain(&b).any(|d| d.is_nar);
    Ok(DecodeStage { a, b, acc, s_ab, e_ab, nar })
}

/// Raw product of two hidden-bit mantissas. The value is
/// `mantissa * 2^(exponent - width + 2)`, i.e. the top two bits of the
/// `width`-bit mantissa cover the range `[1, 4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductTerm {
    pub sign: Sign,
    pub exponent: i32,
    pub mantissa: u64,
    pub width: u32,
    pub is_zero: bool,
    pub is_nar: bool,
}

impl ProductTerm {
    pub fn is_normal(&self) -> bool {
        !self.is_zero && !self.is_nar
    }

    pub fn lsb_exponent(&self) -> i64 {
        self.exponent as i64 - (self.width as i64 - 2)
    }
}

/// S2 output: products and the alignment reference `e_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplyStage {
    pub products: Vec<ProductTerm>,
    pub acc: DecodedPosit,
    pub e_max: i32,
    pub nar: bool,
}

/// Comparator tree over the exponents of nonzero terms (`None` marks a
/// zero term). Yields 0 when every term is zero.
pub fn max_exponent(exponents: impl IntoIterator<Item = Option<i32>>) -> i32 {
    exponents.into_iter().flatten().max().unwrap_or(0)
}

pub fn s2_multiply(cfg: &PdpuConfig, s1: &DecodeStage) -> MultiplyStage {
    let width = 2 * (cfg.in_fmt().frac_width() + 1);
    let products: Vec<ProductTerm> = s1
        .a
        .iter()
        .zip(&s1.b)
        .zip(s1.s_ab.iter().zip(&s1.e_ab))
        .map(|((x, y), (&sign, &exponent))| {
            let is_nar = x.is_nar || y.is_nar;
            let is_zero = !is_nar && (x.is_zero || y.is_zero);
            let mantissa = if is_nar || is_zero {
                0
            } else {
                cfg.multiplier().multiply(x.frac, y.frac)
            };
            ProductTerm { sign, exponent, mantissa, width, is_zero, is_nar }
        })
        .collect();
    let e_max = max_exponent(
        products
            .iter()
            .map(|p| p.is_normal().then_some(p.exponent))
            .chain(std::iter::once(s1.acc.is_normal().then_some(s1.acc.scale))),
    );
    MultiplyStage { products, acc: s1.acc, e_max, nar: s1.nar }
}

/// A term placed in the accumulator, two's complement over `width` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedTerm {
    pub bits: BigUint,
    pub width: u32,
}

impl AlignedTerm {
    pub fn value(&self) -> BigInt {
        signed_from_twos(&self.bits, self.width)
    }
}

/// S3 output: the `N + 1` aligned addends (products first, `acc` last).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignStage {
    pub terms: Vec<AlignedTerm>,
    pub e_max: i32,
    pub wm: u32,
    pub wacc: u32,
    pub nar: bool,
}

/// Places `mantissa * 2^lsb_exp` in a `wm`-bit window whose top bit has
/// weight `2^(e_max + 1)`. Bits that fall below the window are dropped
/// without a sticky bit. The signed result is widened to `wacc` bits.
pub fn align_term(
    sign: Sign,
    mantissa: u64,
    lsb_exp: i64,
    e_max: i32,
    wm: u32,
    wacc: u32,
) -> AlignedTerm {
    let window_lsb = e_max as i64 + 2 - wm as i64;
    let shift = lsb_exp - window_lsb;
    let magnitude = if mantissa == 0 {
        BigUint::zero()
    } else if shift >= 0 {
        BigUint::from(mantissa) << shift as usize
    } else if shift <= -64 {
        BigUint::zero()
    } else {
        BigUint::from(mantissa >> (-shift) as u32)
    };
    debug_assert!(magnitude.bits() <= wm as u64);
    let bits = if sign.is_negative() && !magnitude.is_zero() {
        (BigUint::one() << wacc as usize) - magnitude
    } else {
        magnitude
    };
    AlignedTerm { bits, width: wacc }
}

pub fn s3_align(cfg: &PdpuConfig, s2: &MultiplyStage) -> AlignStage {
    let wm = cfg.wm();
    let wacc = cfg.acc_width();
    let mut terms: Vec<AlignedTerm> = s2
        .products
        .iter()
        .map(|p| {
            let m = if p.is_normal() { p.mantissa } else { 0 };
            align_term(p.sign, m, p.lsb_exponent(), s2.e_max, wm, wacc)
        })
        .collect();
    let acc = &s2.acc;
    let acc_m = if acc.is_normal() { acc.frac } else { 0 };
    terms.push(align_term(
        acc.sign,
        acc_m,
        acc.scale as i64 - acc.frac_width as i64,
        s2.e_max,
        wm,
        wacc,
    ));
    AlignStage { terms, e_max: s2.e_max, wm, wacc, nar: s2.nar }
}

/// S4 output: redundant sum, final sign `f_s` and magnitude `s_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulateStage {
    pub csa: CsaPair,
    pub f_s: Sign,
    pub s_m: BigUint,
    pub e_max: i32,
    pub wm: u32,
    pub wacc: u32,
    pub nar: bool,
}

pub fn s4_accumulate(s3: &AlignStage) -> AccumulateStage {
    let addends: Vec<BigUint> = s3.terms.iter().map(|t| t.bits.clone()).collect();
    let csa = csa_compress(&addends, s3.wacc);
    let total = csa.resolve();
    let negative = total.bit(s3.wacc as u64 - 1);
    let s_m = if negative {
        (BigUint::one() << s3.wacc as usize) - total
    } else {
        total
    };
    AccumulateStage {
        csa,
        f_s: Sign::from_negative(negative),
        s_m,
        e_max: s3.e_max,
        wm: s3.wm,
        wacc: s3.wacc,
        nar: s3.nar,
    }
}

/// Leading zeros of `x` viewed as a `width`-bit vector.
pub fn leading_zeros(x: &BigUint, width: u32) -> u32 {
    width - x.bits() as u32
}

/// Final exponent `f_e` for a nonzero `s_m`: the weight of its leading one.
pub fn final_exponent(s4: &AccumulateStage) -> i64 {
    let lzc = leading_zeros(&s4.s_m, s4.wacc) as i64;
    s4.e_max as i64 + 1 + (s4.wacc as i64 - s4.wm as i64) - lzc
}

/// S5: normalizes `s_m` so its leading one is the hidden bit, narrowing to
/// 64 bits. Only the bits dropped here feed the sticky flag.
pub fn s5_normalize(s4: &AccumulateStage) -> UnroundedValue {
    if s4.nar {
        return UnroundedValue::nar();
    }
    if s4.s_m.is_zero() {
        return UnroundedValue::zero();
    }
    let f_e = final_exponent(s4);
    let window_lsb = s4.e_max as i64 + 2 - s4.wm as i64;
    let (mant, lsb, sticky) = narrow_biguint(&s4.s_m, window_lsb);
    let v = UnroundedValue::from_scaled(s4.f_s, mant as u128, lsb, sticky);
    debug_assert_eq!(v.scale, f_e);
    v
}

/// S6: round and pack.
pub fn s6_encode(v: &UnroundedValue, out_fmt: PositFormat) -> PositBits {
    encode(v, out_fmt)
}

/// Fused (or quire) dot product: `s6(s5(s4(s3(s2(s1(..))))))`.
pub fn fused_dot(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<PositBits, DotError> {
    let s1 = s1_decode(cfg, va, vb, acc)?;
    let s2 = s2_multiply(cfg, &s1);
    let s3 = s3_align(cfg, &s2);
    let s4 = s4_accumulate(&s3);
    let s5 = s5_normalize(&s4);
    Ok(s6_encode(&s5, cfg.out_fmt()))
}

/// Line-oriented `stage.field=value` dump of every intermediate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageTrace {
    pub lines: Vec<(String, String)>,
}

impl StageTrace {
    fn push(&mut self, key: &str, value: impl Into<String>) {
        self.lines.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for StageTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.lines {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

fn hex_width(x: &BigUint, width: u32) -> String {
    format!("{:0w$x}", x, w = width.div_ceil(4) as usize)
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

/// Same computation as [`fused_dot`], recording each stage.
pub fn fused_dot_traced(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<(PositBits, StageTrace), DotError> {
    let mut t = StageTrace::default();
    let s1 = s1_decode(cfg, va, vb, acc)?;
    t.push("s1.s_ab", join(&s1.s_ab, |s| s.symbol().to_string()));
    t.push("s1.e_ab", join(&s1.e_ab, |e| e.to_string()));
    t.push("s1.nar", (s1.nar as u8).to_string());

    let s2 = s2_multiply(cfg, &s1);
    t.push(
        "s2.mantissa",
        join(&s2.products, |p| format!("{:0w$x}", p.mantissa, w = p.width.div_ceil(4) as usize)),
    );
    t.push("s2.e_max", s2.e_max.to_string());

    let s3 = s3_align(cfg, &s2);
    t.push("s3.wm", s3.wm.to_string());
    t.push("s3.wacc", s3.wacc.to_string());
    t.push("s3.aligned", join(&s3.terms, |a| hex_width(&a.bits, a.width)));

    let s4 = s4_accumulate(&s3);
    t.push("s4.sum", hex_width(&s4.csa.sum, s4.wacc));
    t.push("s4.carry", hex_width(&s4.csa.carry, s4.wacc));
    t.push("s4.f_s", s4.f_s.symbol().to_string());
    t.push("s4.s_m", hex_width(&s4.s_m, s4.wacc));

    let s5 = s5_normalize(&s4);
    if s5.is_nar {
        t.push("s5.kind", "nar");
    } else if s5.is_zero {
        t.push("s5.kind", "zero");
    } else {
        t.push("s5.lzc", leading_zeros(&s4.s_m, s4.wacc).to_string());
        t.push("s5.f_e", s5.scale.to_string());
        t.push("s5.f_m", format!("{:016x}", s5.mantissa << (64 - s5.width)));
        t.push("s5.sticky", (s5.sticky as u8).to_string());
    }

    let out = s6_encode(&s5, cfg.out_fmt());
    t.push("s6.out", out.to_string());
    Ok((out, t))
}
