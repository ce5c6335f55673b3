//! Coded slotted ALOHA analysis and simulation.
//!
//! Users split a packet into `k` information segments, encode them with a
//! component code drawn from a distribution and transmit the `n` coded
//! segments in distinct slices of a frame. The receiver runs successive
//! interference cancellation, decoding each component code from the
//! segments it has collected so far.
//!
//! - [`gf2`], [`code`]: packed GF(2) matrices, component codes, information
//!   functions and EXIT functions.
//! - [`ensemble`]: component distributions and random-code ensembles.
//! - [`de`]: density evolution, asymptotic thresholds, stability bounds and
//!   EXIT charts.
//! - [`capacity`]: the rate-dependent capacity bound.
//! - [`sim`]: frame generation, SIC and genie decoders, Monte Carlo campaigns.
//! - [`optimizer`]: differential evolution over distributions.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod code;
pub mod de;
pub mod ensemble;
pub mod error;
pub mod gf2;
pub mod optimizer;
pub mod sim;

pub use code::BinaryLinearCode;
pub use ensemble::{Component, ComponentDistribution, DistributionConfig};
pub use error::{Error, Result};
