//! Configuration and verification suites behind the `quasitrace` binary.

pub mod config;
pub mod suites;
