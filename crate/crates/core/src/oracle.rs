//! Exact-arithmetic reference results for every engine mode.
//!
//! The sum of products is formed exactly in dyadic rationals; the fused
//! reference rounds once, the step-rounded schedules round exactly where the
//! discrete architectures do.

use std::fmt;
use std::str::FromStr;

use crate::engine::{DotError, Mode, PdpuConfig};
use crate::exact::ExactValue;
use crate::posit::{PositBits, PositFormat};

fn any_nar(va: &[PositBits], vb: &[PositBits], acc: PositBits) -> bool {
    acc.is_nar() || va.iter().chain(vb).any(|p| p.is_nar())
}

/// `acc + va . vb`, exact, as an [`ExactValue`] (NaR if any operand is NaR).
pub fn exact_dot(va: &[PositBits], vb: &[PositBits], acc: PositBits) -> ExactValue {
    if any_nar(va, vb, acc) {
        return ExactValue::nar();
    }
    va.iter()
        .zip(vb)
        .map(|(a, b)| &a.to_exact() * &b.to_exact())
        .fold(acc.to_exact(), |s, t| &s + &t)
}

/// Exact sum of products plus `acc`, rounded once to the output format.
pub fn oracle_fused_dot(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<PositBits, DotError> {
    cfg.check_operands(va, vb, acc)?;
    Ok(exact_dot(va, vb, acc).round_to(cfg.out_fmt()))
}

/// Rounding order of a discrete architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// Round each product, then every node of the adder tree; `acc` last.
    MulAdd,
    /// `r <- round(r + a_i * b_i)` starting from `acc`.
    Fma,
}

impl Schedule {
    /// The schedule replayed by a discrete engine mode.
    pub fn from_mode(mode: Mode) -> Result<Self, DotError> {
        match mode {
            Mode::DiscreteMulAdd => Ok(Schedule::MulAdd),
            Mode::DiscreteFma => Ok(Schedule::Fma),
            other => Err(DotError::UnknownSchedule(other.token().to_string())),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Schedule::MulAdd => "muladd",
            Schedule::Fma => "fma",
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Schedule {
    type Err = DotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "muladd" | "mul-add" => Ok(Schedule::MulAdd),
            "fma" => Ok(Schedule::Fma),
            _ => Err(DotError::UnknownSchedule(s.to_string())),
        }
    }
}

fn round_exact(x: &ExactValue, fmt: PositFormat) -> ExactValue {
    x.round_to(fmt).to_exact()
}

/// Replays a discrete rounding schedule with exact arithmetic between
/// roundings.
pub fn oracle_step_rounded_dot(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
    schedule: Schedule,
) -> Result<PositBits, DotError> {
    cfg.check_operands(va, vb, acc)?;
    let out = cfg.out_fmt();
    if any_nar(va, vb, acc) {
        return Ok(out.nar());
    }
    let result = match schedule {
        Schedule::MulAdd => {
            let mut level: Vec<ExactValue> = va
                .iter()
                .zip(vb)
                .map(|(a, b)| round_exact(&(&a.to_exact() * &b.to_exact()), out))
                .collect();
            while level.len() > 1 {
                level = level
                    .chunks(2)
                    .map(|pair| match pair {
                        [x, y] => round_exact(&(x + y), out),
                        [x] => x.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
            }
            &level[0] + &acc.to_exact()
        }
        Schedule::Fma => va.iter().zip(vb).fold(acc.to_exact(), |r, (a, b)| {
            round_exact(&(&r + &(&a.to_exact() * &b.to_exact())), out)
        }),
    };
    Ok(result.round_to(out))
}
