//! Batch front end for the Lotka–Volterra optimal control solver: experiment
//! presets, configuration files, convergence studies, phase-plane reports,
//! field export and the finite-difference self checks.

pub mod checks;
pub mod error;
pub mod export;
pub mod preset;
pub mod report;
pub mod study;

pub use error::{CliError, CliResult};
