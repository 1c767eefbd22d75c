//! One-parameter sweeps executed on the rayon pool.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig};
use crate::engine::{run_summary, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    OmegaM,
    OmegaA,
    G,
    Gamma,
    NTh,
    DtMeasure,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::OmegaM => "omega_m",
            Axis::OmegaA => "omega_a",
            Axis::G => "g",
            Axis::Gamma => "gamma",
            Axis::NTh => "n_th",
            Axis::DtMeasure => "dt_measure",
        }
    }

    /// Copy of `config` with this axis set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, ConfigError> {
        let mut c = config.clone();
        match self {
            Axis::OmegaM => c.params.omega_m = value,
            Axis::OmegaA => c.params.omega_a = value,
            Axis::G => c.params.g = value,
            Axis::Gamma => c.params.gamma = value,
            Axis::NTh => c.params.n_th = value,
            Axis::DtMeasure => c = c.with_dt_measure(value)?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "omega_m" => Axis::OmegaM,
            "omega_a" => Axis::OmegaA,
            "g" => Axis::G,
            "gamma" => Axis::Gamma,
            "n_th" => Axis::NTh,
            "dt_measure" => Axis::DtMeasure,
            other => {
                return Err(format!(
                    "unknown sweep axis {other:?} (expected omega_m, omega_a, g, gamma, n_th or dt_measure)"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Summary,
}

/// Summary of `config` at one sweep value; invalid values give a failed row.
pub fn sweep_point(config: &ExperimentConfig, axis: Axis, value: f64) -> SweepRow {
    let summary = match axis.apply(config, value) {
        Ok(c) => run_summary(&c),
        Err(e) => Summary::failed(e),
    };
    SweepRow { value, summary }
}

/// Runs every value concurrently; rows come back in input order and equal
/// what [`sweep_point`] gives for each value on its own.
pub fn run_sweep(config: &ExperimentConfig, axis: Axis, values: &[f64]) -> Vec<SweepRow> {
    values.par_iter().map(|&v| sweep_point(config, axis, v)).collect()
}
