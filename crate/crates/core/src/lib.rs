//! Distribution-matching condensation for labeled time-series data.
//!
//! A small set of learnable samples is optimized so that its class-wise mean
//! embedding matches the original data's under randomly sampled networks.
//! The crate also trains classifier cohorts on either set, compares them,
//! and measures how far condensed samples sit from real records.
//!
//! Modules:
//!
//! - [`tensor`]: tensors, reverse-mode tape, Adam/SGD, gradient checking
//! - [`nets`]: the architecture catalog, parameter sampling, embed/predict
//! - [`data`]: dataset format, standardization, splits, synthetic data, sizes
//! - [`condense`]: the condensation loop and its loss
//! - [`eval`]: BCE, AUC, classifier training, convergence, cohort reports
//! - [`privacy`]: nearest-neighbour distances, histograms, variable trends
//! - [`cli`]: the `gen`/`condense`/`eval`/`diagnose`/`compare` commands

pub mod tensor;
pub mod nets;
pub mod data;
pub mod condense;
pub mod eval;
pub mod privacy;
pub mod cli;
