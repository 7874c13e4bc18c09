//! Seeded differential fuzzing of the engine against the oracle.
//!
//! Case `i` of a run draws its operands from a ChaCha stream selected by
//! `i`, so any single case can be regenerated without replaying the run and
//! results do not depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{pdpu_dot, DotError, PdpuConfig};
use crate::oracle::{oracle_fused_dot, oracle_step_rounded_dot, Schedule};
use crate::posit::{PositBits, PositFormat};
use crate::vectors::TestVector;

/// What the engine output is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reference {
    /// The oracle replaying the engine's own rounding: the fused oracle for
    /// fused and quire modes, the step-rounded schedule for discrete modes.
    #[default]
    Own,
    /// Always the single-rounding fused oracle.
    Fused,
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reference::Own => "own",
            Reference::Fused => "fused",
        })
    }
}

impl FromStr for Reference {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "own" | "schedule" => Ok(Reference::Own),
            "fused" | "oracle" => Ok(Reference::Fused),
            other => Err(format!("unknown reference {other:?} (expected own or fused)")),
        }
    }
}

/// The reference result for one case.
pub fn reference_dot(
    cfg: &PdpuConfig,
    reference: Reference,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<PositBits, DotError> {
    if reference == Reference::Own && cfg.mode().is_discrete() {
        oracle_step_rounded_dot(cfg, va, vb, acc, Schedule::from_mode(cfg.mode())?)
    } else {
        oracle_fused_dot(cfg, va, vb, acc)
    }
}

fn random_operand(rng: &mut ChaCha8Rng, fmt: PositFormat) -> PositBits {
    match rng.random_range(0..20u32) {
        0 => fmt.zero(),
        1..=10 => PositBits::wrapping(fmt, rng.random()),
        _ => {
            // Moderate magnitudes around 1, where most fraction bits survive.
            let spread = 1i64 << (fmt.n() - 3);
            let off = rng.random_range(-spread..spread);
            let p = PositBits::wrapping(fmt, (fmt.one().bits() as i64 + off) as u32);
            if rng.random() {
                p.negate()
            } else {
                p
            }
        }
    }
}

/// Operands of case `index` in the run seeded with `seed`.
pub fn random_case(
    cfg: &PdpuConfig,
    seed: u64,
    index: u64,
) -> (Vec<PositBits>, Vec<PositBits>, PositBits) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = cfg.n_terms();
    let va = (0..n).map(|_| random_operand(&mut rng, cfg.in_fmt())).collect();
    let vb = (0..n).map(|_| random_operand(&mut rng, cfg.in_fmt())).collect();
    let acc = random_operand(&mut rng, cfg.out_fmt());
    (va, vb, acc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub cases: u64,
    /// Diverging cases in index order; `expected` holds the reference.
    pub divergences: Vec<TestVector>,
}

impl FuzzReport {
    pub fn is_clean(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Runs `count` seeded cases and collects every divergence between the
/// engine and the chosen reference.
pub fn fuzz(cfg: &PdpuConfig, count: u64, seed: u64, reference: Reference) -> FuzzReport {
    let divergences = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let (a, b, acc) = random_case(cfg, seed, i);
            let got = pdpu_dot(cfg, &a, &b, acc).expect("generated operands match cfg");
            let expected =
                reference_dot(cfg, reference, &a, &b, acc).expect("generated operands match cfg");
            (got != expected).then_some(TestVector { cfg: *cfg, a, b, acc, expected })
        })
        .collect();
    FuzzReport { cases: count, divergences }
}

/// Index of the first case (below `limit`) where the engine and the chosen
/// reference disagree.
pub fn first_divergence(
    cfg: &PdpuConfig,
    limit: u64,
    seed: u64,
    reference: Reference,
) -> Option<u64> {
    (0..limit).find(|&i| {
        let (a, b, acc) = random_case(cfg, seed, i);
        pdpu_dot(cfg, &a, &b, acc).ok() != reference_dot(cfg, reference, &a, &b, acc).ok()
    })
}
