//! Experiment harness: configuration, runners, the property suite and
//! CSV / JSON output.

pub mod config;
pub mod experiments;
pub mod record;
pub mod suite;

pub use config::{Experiment, ExperimentConfig, Format, Mode};
pub use experiments::run;
pub use record::{emit, RunRecord};
