//! Discrete dot-product architectures built from standalone posit units.
//!
//! Each unit decodes its operands, computes with a guard/sticky datapath and
//! re-encodes, so every intermediate result is rounded to the output format.

use super::{DotError, Multiplier, PdpuConfig};
use crate::posit::{encode, DecodedPosit, PositBits, PositFormat, Sign, UnroundedValue};

/// Signed `mant * 2^lsb_exp`; zero when `mant == 0`.
#[derive(Debug, Clone, Copy)]
struct Operand {
    sign: Sign,
    mant: u64,
    lsb_exp: i64,
}

impl Operand {
    fn from_decoded(d: &DecodedPosit) -> Self {
        debug_assert!(!d.is_nar);
        Operand {
            sign: d.sign,
            mant: if d.is_zero { 0 } else { d.frac },
            lsb_exp: d.scale as i64 - d.frac_width as i64,
        }
    }

    fn product(a: &DecodedPosit, b: &DecodedPosit, mul: Multiplier) -> Self {
        if a.is_zero || b.is_zero {
            return Operand { sign: Sign::Pos, mant: 0, lsb_exp: 0 };
        }
        Operand {
            sign: a.sign * b.sign,
            mant: mul.multiply(a.frac, b.frac),
            lsb_exp: a.scale as i64 + b.scale as i64
                - a.frac_width as i64
                - b.frac_width as i64,
        }
    }

    fn msb_exp(&self) -> i64 {
        self.lsb_exp + 63 - self.mant.leading_zeros() as i64
    }

    fn to_unrounded(self) -> UnroundedValue {
        UnroundedValue::from_scaled(self.sign, self.mant as u128, self.lsb_exp, false)
    }
}

// MSB position of the larger operand in the 128-bit adder.
const TOP: u32 = 125;

/// Adds two operands, returning a value whose 64-bit narrowing plus sticky
/// rounds exactly like the infinitely precise sum.
fn add_operands(x: Operand, y: Operand) -> UnroundedValue {
    if x.mant == 0 {
        return y.to_unrounded();
    }
    if y.mant == 0 {
        return x.to_unrounded();
    }
    let (x, y) = if x.msb_exp() >= y.msb_exp() { (x, y) } else { (y, x) };
    let d = (x.msb_exp() - y.msb_exp()) as u64;

    let xa = (x.mant as u128) << (TOP - (63 - x.mant.leading_zeros()));
    let y_full = (y.mant as u128) << (TOP - (63 - y.mant.leading_zeros()));
    let (ya, lost) = if d == 0 {
        (y_full, false)
    } else if d >= 128 {
        (0, true)
    } else {
        (y_full >> d, y_full & ((1u128 << d) - 1) != 0)
    };

    // With bits lost, y is strictly between ya and ya + 1 (in units of the
    // adder lsb) and x dominates, so the true magnitude lies strictly
    // between `mag` and `mag + 1`.
    let (sign, mag, sticky) = if x.sign == y.sign {
        (x.sign, xa + ya, lost)
    } else if lost {
        (x.sign, xa - ya - 1, true)
    } else if xa >= ya {
        (x.sign, xa - ya, false)
    } else {
        (y.sign, ya - xa, false)
    };
    if mag == 0 {
        return UnroundedValue::zero();
    }
    UnroundedValue::from_scaled(sign, mag, x.msb_exp() - TOP as i64, sticky)
}

/// Posit multiplier: `round(a * b)` in `fmt`.
pub fn posit_mul(a: PositBits, b: PositBits, fmt: PositFormat, mul: Multiplier) -> PositBits {
    let (da, db) = (a.decode(), b.decode());
    if da.is_nar || db.is_nar {
        return fmt.nar();
    }
    encode(&Operand::product(&da, &db, mul).to_unrounded(), fmt)
}

/// Posit adder: `round(x + y)` in `fmt`.
pub fn posit_add(x: PositBits, y: PositBits, fmt: PositFormat) -> PositBits {
    let (dx, dy) = (x.decode(), y.decode());
    if dx.is_nar || dy.is_nar {
        return fmt.nar();
    }
    encode(&add_operands(Operand::from_decoded(&dx), Operand::from_decoded(&dy)), fmt)
}

/// Posit FMA unit: `round(c + a * b)` in `fmt` with one rounding.
pub fn posit_fma(
    c: PositBits,
    a: PositBits,
    b: PositBits,
    fmt: PositFormat,
    mul: Multiplier,
) -> PositBits {
    let (dc, da, db) = (c.decode(), a.decode(), b.decode());
    if dc.is_nar || da.is_nar || db.is_nar {
        return fmt.nar();
    }
    encode(
        &add_operands(Operand::from_decoded(&dc), Operand::product(&da, &db, mul)),
        fmt,
    )
}

/// Multipliers followed by a binary adder tree, every result rounded to the
/// output format. The tree pairs neighbours left to right level by level
/// (an odd element passes up unchanged) and `acc` is added last.
pub fn discrete_dot_mul_add(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<PositBits, DotError> {
    cfg.check_operands(va, vb, acc)?;
    let out = cfg.out_fmt();
    let mut level: Vec<PositBits> = va
        .iter()
        .zip(vb)
        .map(|(&a, &b)| posit_mul(a, b, out, cfg.multiplier()))
        .collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [x, y] => posit_add(*x, *y, out),
                [x] => *x,
                _ => unreachable!(),
            })
            .collect();
    }
    Ok(posit_add(level[0], acc, out))
}

/// Cascaded FMA units: `r <- round(r + a_i * b_i)` starting from `acc`.
pub fn discrete_dot_fma(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<PositBits, DotError> {
    cfg.check_operands(va, vb, acc)?;
    let out = cfg.out_fmt();
    Ok(va
        .iter()
        .zip(vb)
        .fold(acc, |r, (&a, &b)| posit_fma(r, a, b, out, cfg.multiplier())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactValue;

    fn p(n: u32, es: u32) -> PositFormat {
        PositFormat::new(n, es).unwrap()
    }

    #[test]
    fn adder_exhaustive_p6() {
        let f = p(6, 1);
        for x in f.patterns() {
            for y in f.patterns() {
                let want = (&x.to_exact() + &y.to_exact()).round_to(f);
                assert_eq!(posit_add(x, y, f), want, "{x} + {y}");
            }
        }
    }

    #[test]
    fn multiplier_exhaustive_p7_into_p9() {
        let (fi, fo) = (p(7, 1), p(9, 1));
        for x in fi.patterns() {
            for y in fi.patterns() {
                let want = (&x.to_exact() * &y.to_exact()).round_to(fo);
                assert_eq!(posit_mul(x, y, fo, Multiplier::Plain), want);
            }
        }
    }

    #[test]
    fn fma_far_apart_operands() {
        // c dominates; the product only contributes sticky information.
        let f = p(16, 2);
        let c = PositBits::from_f64(f, 1.0);
        let a = PositBits::from_f64(f, -1e-12);
        let b = PositBits::from_f64(f, 3.0);
        let want = (&c.to_exact() + &(&a.to_exact() * &b.to_exact())).round_to(f);
        assert_eq!(posit_fma(c, a, b, f, Multiplier::Plain), want);
        assert_eq!(want, c);
    }

    #[test]
    fn sticky_subtraction_with_all_ones_mantissa() {
        // x - y where y is far below x and has a long all-ones mantissa.
        let x = Operand { sign: Sign::Pos, mant: 1, lsb_exp: 0 };
        let y = Operand { sign: Sign::Neg, mant: u64::MAX, lsb_exp: -200 };
        let got = add_operands(x, y);
        let exact = ExactValue::one() - ExactValue::from_parts(u64::MAX.into(), -200);
        for f in [p(8, 0), p(16, 2), p(32, 2)] {
            assert_eq!(encode(&got, f), exact.round_to(f));
        }
    }

    #[test]
    fn nar_propagates() {
        let f = p(8, 2);
        assert!(posit_add(f.nar(), f.one(), f).is_nar());
        assert!(posit_mul(f.zero(), f.nar(), f, Multiplier::Plain).is_nar());
        assert!(posit_fma(f.one(), f.one(), f.nar(), f, Multiplier::Plain).is_nar());
    }
}
