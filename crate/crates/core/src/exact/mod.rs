//! Exact and certified arithmetic used by samplers and the oracle.

pub mod interval;
pub mod symbolic;
pub mod uniform;

pub use interval::{F64Range, Interval};
pub use symbolic::Symbolic;
pub use uniform::{bernoulli, bernoulli_ratio, bernoulli_rational, next_replacement, Probability};
