//! Logic-respecting distances between time series.

pub mod boundary;
pub mod distance;
pub mod learn;
pub mod project;
pub mod specdsl;
pub mod synth;
pub mod trace;
