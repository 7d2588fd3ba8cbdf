//! Scalable control of networked MDPs with κ-local spectral features.
pub mod actor;
pub mod checks;
pub mod commands;
pub mod config;
pub mod critic;
pub mod env;
pub mod error;
pub mod features;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
