//! Experiment harness around `sched-core`: configs, file formats, runs,
//! presets and plots.

pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod plot;
pub mod presets;

pub use error::{Error, Result};
