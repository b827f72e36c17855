//! Library surface of the experiment runner: config parsing, sweep
//! execution, and bundle verification. The `gtn` binary is a thin wrapper.

pub mod config;
pub mod experiment;
pub mod replay;
