//! Recursive carry-save adder tree built from 4:2 and 3:2 compressors.
//!
//! All vectors are unsigned integers modulo `2^width`; two's-complement
//! addends therefore sum correctly as long as the true total fits.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

/// A fixed-width bit vector the compressors can operate on. Arithmetic is
/// modulo `2^width`.
pub trait CsaWord: Clone {
    fn zero_word() -> Self;
    fn xor3(a: &Self, b: &Self, c: &Self) -> Self;
    /// `majority(a, b, c) << 1`, truncated to `width` bits.
    fn carry_out(a: &Self, b: &Self, c: &Self, width: u32) -> Self;
    fn add_mod(a: &Self, b: &Self, width: u32) -> Self;
}

impl CsaWord for BigUint {
    fn zero_word() -> Self {
        BigUint::zero()
    }

    fn xor3(a: &Self, b: &Self, c: &Self) -> Self {
        a ^ b ^ c
    }

    fn carry_out(a: &Self, b: &Self, c: &Self, width: u32) -> Self {
        let maj = (a & b) | (a & c) | (b & c);
        let shifted = maj << 1usize;
        if shifted.bits() > width as u64 {
            shifted & mask(width)
        } else {
            shifted
        }
    }

    fn add_mod(a: &Self, b: &Self, width: u32) -> Self {
        let s = a + b;
        if s.bits() > width as u64 {
            s & mask(width)
        } else {
            s
        }
    }
}

impl CsaWord for u64 {
    fn zero_word() -> Self {
        0
    }

    fn xor3(a: &Self, b: &Self, c: &Self) -> Self {
        a ^ b ^ c
    }

    fn carry_out(a: &Self, b: &Self, c: &Self, width: u32) -> Self {
        (((a & b) | (a & c) | (b & c)) << 1) & mask_u64(width)
    }

    fn add_mod(a: &Self, b: &Self, width: u32) -> Self {
        a.wrapping_add(*b) & mask_u64(width)
    }
}

fn mask_u64(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Redundant `(sum, carry)` form of a multi-operand addition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsaPair<W = BigUint> {
    pub sum: W,
    pub carry: W,
    pub width: u32,
}

impl<W: CsaWord> CsaPair<W> {
    /// Final carry-propagate addition, `(sum + carry) mod 2^width`.
    pub fn resolve(&self) -> W {
        W::add_mod(&self.sum, &self.carry, self.width)
    }
}

pub fn mask(width: u32) -> BigUint {
    (BigUint::one() << width as usize) - 1u32
}

/// Two's-complement encoding of `x` in `width` bits.
pub fn to_twos(x: &BigInt, width: u32) -> BigUint {
    let m = BigInt::one() << width as usize;
    let r = ((x % &m) + &m) % &m;
    r.to_biguint().expect("non-negative residue")
}

/// Full-adder row: three vectors in, `(sum, carry)` out.
pub fn compress_3_2<W: CsaWord>(a: &W, b: &W, c: &W, width: u32) -> (W, W) {
    (W::xor3(a, b, c), W::carry_out(a, b, c, width))
}

/// 4:2 compressor row: two chained full-adder rows where the first row's
/// carries enter the second row one position up.
pub fn compress_4_2<W: CsaWord>(a: &W, b: &W, c: &W, d: &W, width: u32) -> (W, W) {
    let (s1, cout) = compress_3_2(a, b, c, width);
    compress_3_2(&s1, d, &cout, width)
}

/// Reduces `addends` (each already taken mod `2^width`) to a sum/carry pair.
///
/// Each level feeds groups of four to 4:2 compressors and a trailing group
/// of three to a 3:2 compressor; a trailing one or two vectors pass through.
/// Levels repeat until at most two vectors remain.
pub fn csa_compress<W: CsaWord>(addends: &[W], width: u32) -> CsaPair<W> {
    match addends {
        [] => CsaPair { sum: W::zero_word(), carry: W::zero_word(), width },
        [x] => CsaPair { sum: x.clone(), carry: W::zero_word(), width },
        [x, y] => CsaPair { sum: x.clone(), carry: y.clone(), width },
        _ => {
            let mut next = Vec::with_capacity(addends.len() / 2 + 2);
            for group in addends.chunks(4) {
                match group {
                    [a, b, c, d] => {
                        let (s, c) = compress_4_2(a, b, c, d, width);
                        next.push(s);
                        next.push(c);
                    }
                    [a, b, c] => {
                        let (s, c) = compress_3_2(a, b, c, width);
                        next.push(s);
                        next.push(c);
                    }
                    rest => next.extend(rest.iter().cloned()),
                }
            }
            csa_compress(&next, width)
        }
    }
}
