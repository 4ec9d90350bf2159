//! Experiment runners behind the `ftnn` binary.

pub mod boundary;
pub mod config;
pub mod grad;
pub mod mnist;
pub mod sequence;
