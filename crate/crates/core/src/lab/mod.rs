//! Experiment configuration, dimension pipelines and report persistence.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod standalone;
