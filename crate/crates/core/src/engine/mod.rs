//! Fused mixed-precision posit dot-product datapath,
//! `out = acc + a_0*b_0 + ... + a_{N-1}*b_{N-1}`.
//!
//! The fused path runs six pure stage functions (decode, multiply, align,
//! accumulate, normalize, encode) so every intermediate can be inspected;
//! [`pdpu_dot`] is literally their composition. The discrete architectures
//! (multipliers plus adder tree, cascaded FMAs) are modelled in [`discrete`]
//! for accuracy comparisons.

pub mod booth;
pub mod csa;
pub mod discrete;
pub mod stages;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::posit::{quire_width, PositBits, PositFormat};

pub use discrete::{discrete_dot_fma, discrete_dot_mul_add};
pub use stages::{fused_dot, fused_dot_traced, StageTrace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("input format {input} and output format {output} must share es")]
    EsMismatch { input: PositFormat, output: PositFormat },
    #[error("output format {output} is narrower than input format {input}")]
    NarrowOutput { input: PositFormat, output: PositFormat },
    #[error("dot-product size must be at least 1")]
    NoTerms,
    #[error("alignment width {0} is below the minimum of 4 bits")]
    WidthTooSmall(u32),
    #[error("unknown mode {0:?} (expected fused, quire, muladd or fma)")]
    UnknownMode(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DotError {
    #[error("length mismatch: configured N = {expected}, got |a| = {a}, |b| = {b}")]
    LengthMismatch { expected: usize, a: usize, b: usize },
    #[error("format mismatch for {operand}: expected {expected}, found {found}")]
    FormatMismatch {
        operand: &'static str,
        expected: PositFormat,
        found: PositFormat,
    },
    #[error("unknown rounding schedule {0:?}")]
    UnknownSchedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Single rounding, alignment truncated to `wm` bits.
    Fused,
    /// Fused with `wm` forced to the quire width of the output format.
    Quire,
    /// Multipliers and a binary adder tree, rounding after every operation.
    DiscreteMulAdd,
    /// Cascaded fused multiply-add units, one rounding per MAC.
    DiscreteFma,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Fused, Mode::Quire, Mode::DiscreteMulAdd, Mode::DiscreteFma];

    pub fn token(self) -> &'static str {
        match self {
            Mode::Fused => "fused",
            Mode::Quire => "quire",
            Mode::DiscreteMulAdd => "muladd",
            Mode::DiscreteFma => "fma",
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, Mode::DiscreteMulAdd | Mode::DiscreteFma)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConfigError::UnknownMode(s.to_string()))
    }
}

/// Mantissa multiplier used in S2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Multiplier {
    #[default]
    Plain,
    BoothRadix4,
}

impl Multiplier {
    pub fn multiply(self, x: u64, y: u64) -> u64 {
        match self {
            Multiplier::Plain => x * y,
            Multiplier::BoothRadix4 => booth::booth_radix4_multiply(x as u32, y as u32),
        }
    }
}

/// Engine configuration: formats, dot-product size `N`, alignment width
/// `W_m` and accumulation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PdpuConfig {
    in_fmt: PositFormat,
    out_fmt: PositFormat,
    n_terms: usize,
    wm: u32,
    mode: Mode,
    multiplier: Multiplier,
}

impl PdpuConfig {
    /// Validates the configuration. In [`Mode::Quire`] the given `wm` is
    /// replaced by `quire_width(out_fmt)`.
    pub fn new(
        in_fmt: PositFormat,
        out_fmt: PositFormat,
        n_terms: usize,
        wm: u32,
        mode: Mode,
    ) -> Result<Self, ConfigError> {
        if in_fmt.es() != out_fmt.es() {
            return Err(ConfigError::EsMismatch { input: in_fmt, output: out_fmt });
        }
        if in_fmt.n() > out_fmt.n() {
            return Err(ConfigError::NarrowOutput { input: in_fmt, output: out_fmt });
        }
        if n_terms == 0 {
            return Err(ConfigError::NoTerms);
        }
        let wm = if mode == Mode::Quire { quire_width(out_fmt) } else { wm };
        if wm < 4 {
            return Err(ConfigError::WidthTooSmall(wm));
        }
        Ok(PdpuConfig {
            in_fmt,
            out_fmt,
            n_terms,
            wm,
            mode,
            multiplier: Multiplier::Plain,
        })
    }

    pub fn with_multiplier(mut self, multiplier: Multiplier) -> Self {
        self.multiplier = multiplier;
        self
    }

    /// Same formats and size, different mode (and width for quire).
    pub fn with_mode(self, mode: Mode) -> Self {
        Self::new(self.in_fmt, self.out_fmt, self.n_terms, self.wm, mode)
            .expect("already validated")
            .with_multiplier(self.multiplier)
    }

    pub fn in_fmt(&self) -> PositFormat {
        self.in_fmt
    }

    pub fn out_fmt(&self) -> PositFormat {
        self.out_fmt
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn wm(&self) -> u32 {
        self.wm
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn multiplier(&self) -> Multiplier {
        self.multiplier
    }

    /// Accumulator width: `wm + ceil(log2(N + 1)) + 2`.
    pub fn acc_width(&self) -> u32 {
        let addends = self.n_terms as u64 + 1;
        let growth = 64 - (addends - 1).leading_zeros();
        self.wm + growth + 2
    }

    /// Short label such as `P(13/16,2)`.
    pub fn format_label(&self) -> String {
        format!("P({}/{},{})", self.in_fmt.n(), self.out_fmt.n(), self.in_fmt.es())
    }

    pub(crate) fn check_operands(
        &self,
        va: &[PositBits],
        vb: &[PositBits],
        acc: PositBits,
    ) -> Result<(), DotError> {
        if va.len() != self.n_terms || vb.len() != self.n_terms {
            return Err(DotError::LengthMismatch {
                expected: self.n_terms,
                a: va.len(),
                b: vb.len(),
            });
        }
        let check = |operand, expected: PositFormat, found: PositFormat| {
            if expected == found {
                Ok(())
            } else {
                Err(DotError::FormatMismatch { operand, expected, found })
            }
        };
        for p in va {
            check("a", self.in_fmt, p.fmt())?;
        }
        for p in vb {
            check("b", self.in_fmt, p.fmt())?;
        }
        check("acc", self.out_fmt, acc.fmt())
    }
}

impl fmt::Display for PdpuConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} N={} Wm={} {}",
            self.format_label(),
            self.n_terms,
            self.wm,
            self.mode
        )
    }
}

/// Evaluates `acc + va . vb` in the architecture selected by `cfg.mode()`.
pub fn pdpu_dot(
    cfg: &PdpuConfig,
    va: &[PositBits],
    vb: &[PositBits],
    acc: PositBits,
) -> Result<PositBits, DotError> {
    match cfg.mode {
        Mode::Fused | Mode::Quire => fused_dot(cfg, va, vb, acc),
        Mode::DiscreteMulAdd => discrete_dot_mul_add(cfg, va, vb, acc),
        Mode::DiscreteFma => discrete_dot_fma(cfg, va, vb, acc),
    }
}
