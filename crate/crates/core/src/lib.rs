//! Survival analysis with conditional ordinal ranking networks.
//!
//! The crate covers the full pipeline for discrete-time survival modelling:
//!
//! - [`timegrid`] discretizes continuous follow-up times into `K` ordinal bins.
//! - [`encoding`] turns (bin, event) pairs into monotone binary target rows and
//!   expands censored patients over every bin they could still fall into.
//! - [`curves`] maps network logits to conditional survival probabilities and
//!   their cumulative product, the survival curve.
//! - [`losses`] holds the masked log-likelihood, the pairwise ranking loss, their
//!   combination, and a discrete-hazard baseline, all with analytic gradients.
//! - [`model`] is a small multilayer perceptron trained with Adam.
//! - [`metrics`] implements the time-dependent concordance index and the
//!   censoring-aware mean absolute error in bins and in time units.
//! - [`data`] reads CSV cohorts, builds stratified folds and simulates Weibull
//!   proportional-hazards cohorts with known ground truth.
//! - [`pipeline`] wires the pieces into cross-validation and benchmark runs.

pub mod curves;
pub mod data;
pub mod encoding;
mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod timegrid;

pub use error::{Error, Result};
