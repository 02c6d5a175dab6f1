//! Truly perfect streaming samplers.
//!
//! Samplers return coordinate `i` with probability exactly `G(f_i) / F_G`
//! conditioned on not failing. Acceptance probabilities are never rounded:
//! each is compared against a lazily refined uniform draw. The [`oracle`]
//! module enumerates sampler branches in exact arithmetic to check this.

pub mod error;
pub mod gsampler;
pub mod heavyhitters;
pub mod exact;
pub mod f0;
pub mod format;
pub mod generate;
pub mod matrix;
pub mod measure;
pub mod multipass;
pub mod oracle;
pub mod randomorder;
pub mod reservoir;
pub mod rng;
pub mod sliding;
pub mod smallp;
pub mod smoothhist;
pub mod stream;

pub use error::{Error, Result};
pub use measure::{Exponent, Measure};
pub use stream::{Model, Outcome, SampleResult, StreamConfig, Update};
