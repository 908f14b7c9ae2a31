//! Error analysis of downlink power-domain NOMA with imperfect successive
//! interference cancellation over ordered Rayleigh fading.
//!
//! - [`constellation`]: alphabets, symbol differences and bit labels.
//! - [`channel`]: ordered Rayleigh densities and samplers.
//! - [`pep`]: conditional and averaged pairwise error probabilities.
//! - [`asymptotic`]: Chernoff bounds and diversity estimates.
//! - [`sim`]: Monte Carlo SIC simulator.
//! - [`optimizer`]: union-bound power allocation search.
//! - [`report`]: closed-form vs numerical consistency tables.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod optimizer;
pub mod pep;
pub mod quadrature;
pub mod report;
pub mod sim;
pub mod special;
pub mod system;

pub use channel::ChannelModel;
pub use constellation::{Constellation, Symbol};
pub use error::{Error, Result};
pub use pep::{DeltaWeights, ErrorHypothesis, SicMode};
pub use system::{PowerAllocation, SymbolMode, SystemConfig};
