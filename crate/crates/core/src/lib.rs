//! Bit-accurate model of a configurable posit dot-product unit.

pub mod accuracy;
pub mod engine;
pub mod exact;
pub mod fuzz;
pub mod oracle;
pub mod posit;
pub mod vectors;

pub use engine::{pdpu_dot, ConfigError, DotError, Mode, Multiplier, PdpuConfig};
pub use exact::ExactValue;
pub use posit::{encode, quire_width, PositBits, PositFormat, Sign, UnroundedValue};
pub use oracle::{oracle_fused_dot, oracle_step_rounded_dot, Schedule};
pub use vectors::TestVector;
