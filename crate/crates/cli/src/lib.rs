//! Pipeline commands behind the `logdist` binary.

pub mod casestudy;
pub mod commands;
pub mod config;
pub mod files;
