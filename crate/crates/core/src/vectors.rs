//! Line-oriented test-vector format shared by the fuzzer and the CLI:
//!
//! ```text
//! fmt_in fmt_out N wm mode a_0 .. a_{N-1} b_0 .. b_{N-1} acc expected
//! ```
//!
//! Formats are written `n,es`, patterns as hex without prefix.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{ConfigError, Mode, PdpuConfig};
use crate::posit::{PositBits, PositError, PositFormat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VectorError {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("bad term count {0:?}")]
    BadCount(String),
    #[error("bad alignment width {0:?}")]
    BadWidth(String),
    #[error(transparent)]
    Posit(#[from] PositError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestVector {
    pub cfg: PdpuConfig,
    pub a: Vec<PositBits>,
    pub b: Vec<PositBits>,
    pub acc: PositBits,
    pub expected: PositBits,
}

impl fmt::Display for TestVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (fi, fo) = (self.cfg.in_fmt(), self.cfg.out_fmt());
        write!(
            f,
            "{},{} {},{} {} {} {}",
            fi.n(),
            fi.es(),
            fo.n(),
            fo.es(),
            self.cfg.n_terms(),
            self.cfg.wm(),
            self.cfg.mode()
        )?;
        for p in self.a.iter().chain(&self.b) {
            write!(f, " {p}")?;
        }
        write!(f, " {} {}", self.acc, self.expected)
    }
}

impl FromStr for TestVector {
    type Err = VectorError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(VectorError::FieldCount { expected: 5, found: fields.len() });
        }
        let fi: PositFormat = fields[0].parse()?;
        let fo: PositFormat = fields[1].parse()?;
        let n: usize = fields[2]
            .parse()
            .map_err(|_| VectorError::BadCount(fields[2].to_string()))?;
        let wm: u32 = fields[3]
            .parse()
            .map_err(|_| VectorError::BadWidth(fields[3].to_string()))?;
        let mode: Mode = fields[4].parse()?;
        let cfg = PdpuConfig::new(fi, fo, n, wm, mode)?;
        let expected = 5 + 2 * n + 2;
        if fields.len() != expected {
            return Err(VectorError::FieldCount { expected, found: fields.len() });
        }
        let parse = |f: PositFormat, s: &str| PositBits::parse_hex(f, s);
        let a = fields[5..5 + n].iter().map(|s| parse(fi, s)).collect::<Result<_, _>>()?;
        let b = fields[5 + n..5 + 2 * n]
            .iter()
            .map(|s| parse(fi, s))
            .collect::<Result<_, _>>()?;
        Ok(TestVector {
            cfg,
            a,
            b,
            acc: parse(fo, fields[5 + 2 * n])?,
            expected: parse(fo, fields[6 + 2 * n])?,
        })
    }
}
