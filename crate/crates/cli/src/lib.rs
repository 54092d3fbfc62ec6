//! Companion crate to `tagdiff-core`: configuration files, on-disk formats,
//! statistical estimators, and the `tagdiff` command-line pipeline.

pub mod config;
pub mod estimators;
pub mod formats;
pub mod stats;

pub use config::{Overrides, RunConfig};
pub use estimators::EstimatorReport;
