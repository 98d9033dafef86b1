//! Experiment configs, reports and verification suites.

pub mod cli;
pub mod config;
pub mod report;
pub mod suites;
