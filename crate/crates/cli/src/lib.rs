//! Configuration, scenario presets, sweeps and file output for the
//! `qsqueeze` simulator.

pub mod config;
pub mod engine;
pub mod output;
pub mod runner;
pub mod scenarios;
pub mod sweep;

pub use config::{ConfigError, Engine, ExperimentConfig};
pub use runner::{execute, Report};
pub use scenarios::Scenario;
