//! Command-line driver for the `eqm` solver: job configs, phase-map scans
//! and the JSON, CSV and SVG writers.

pub mod config;
pub mod scan;
pub mod output;
pub mod run;
