//! Experiment framework: topology and scenario generators, configuration
//! files and the experiment driver behind the CLI.

pub mod config;
pub mod experiment;
pub mod scenario;
pub mod topology;
