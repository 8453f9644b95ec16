//! Command-line harness: configuration, verification suites, reports and
//! artifact writers for the `integrable` binary.

pub mod app;
pub mod config;
pub mod error;
pub mod report;
pub mod scatter;
pub mod suites;
