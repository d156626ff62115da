//! Estimate how text attributes drive reader responses, and transport those
//! estimates from the distribution the responses were collected under to a
//! different target text distribution via density-ratio importance weights.

pub mod attributes;
pub mod corpus;
pub mod density_ratio;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod stats;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
