//! Experiment harness for `sgflab-core`: configuration files, on-disk
//! formats, seeded experiment presets, reports and the `sgflab` CLI.

pub mod cli;
pub mod config;
pub mod diagnose;
mod error;
pub mod io;
pub mod manifest;
pub mod presets;
pub mod report;
pub mod svg;

pub use error::{exit, LabError, Result};
pub use sgflab_core::rng::rng_streams;
