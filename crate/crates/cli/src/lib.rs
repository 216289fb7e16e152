//! Experiment harness for inverse-PDE parameter recovery: configs, file
//! formats, training loops, experiment runners, sweeps, and the `bipde`
//! command-line interface.

pub mod cli;
pub mod config;
pub mod encoder_spec;
pub mod experiments;
pub mod formats;
pub mod metrics;
pub mod sweep;
pub mod train;
