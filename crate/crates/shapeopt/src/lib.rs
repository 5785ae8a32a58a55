//! Batch front end for the shape optimization kernels: configuration and
//! presets, scenario construction, runs, verification and reports.

pub mod cli;
pub mod config;
pub mod formats;
pub mod presets;
pub mod report;
pub mod run;
pub mod scenario;
pub mod verify;
