//! Experiment configuration files (TOML).
//!
//! ```toml
//! engine = "fock_feedback"
//! horizon = 150.0
//!
//! [params]
//! omega_m = 0.1
//! omega_a = 8.0
//! g = 1.0
//! gamma = 0.1
//! n_th = 0.0
//!
//! [schedule]
//! dt_measure = 0.7853981633974483
//! ```
//!
//! Unknown keys are rejected. Everything except `engine` and `params` has a
//! default; see [`ExperimentConfig::from_toml_str`].

use std::fmt;
use std::path::{Path, PathBuf};

use qsqueeze::feedback::{optimal_dt, STEADY_TOL, STEADY_WINDOW};
use qsqueeze::params::{steady_state_moments, validate};
use qsqueeze::{FeedbackSchedule, FockSpace, SystemParams};
use serde::{Deserialize, Serialize};

pub const DEFAULT_HORIZON: f64 = 150.0;
pub const DEFAULT_CADENCE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] qsqueeze::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Moment equations of the effective Hamiltonian, qubit frozen in `|e⟩`.
    GaussianEffective,
    /// Master equation for the full qubit⊗oscillator Hamiltonian.
    FockFull,
    /// Full model with the measure-and-reset loop.
    FockFeedback,
    /// Full model measured at the same times but never reset.
    FockNoFeedback,
}

impl Engine {
    pub fn is_protocol(self) -> bool {
        matches!(self, Engine::FockFeedback | Engine::FockNoFeedback)
    }

    pub fn is_fock(self) -> bool {
        self != Engine::GaussianEffective
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::GaussianEffective => "gaussian_effective",
            Engine::FockFull => "fock_full",
            Engine::FockFeedback => "fock_feedback",
            Engine::FockNoFeedback => "fock_no_feedback",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// Time series CSV.
    Series,
    /// One-row steady-state summary CSV.
    Steady,
    /// Wigner grids at the times listed under `[wigner]`.
    Wigner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySettings {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_window() -> usize {
    STEADY_WINDOW
}

fn default_tol() -> f64 {
    STEADY_TOL
}

impl Default for SteadySettings {
    fn default() -> Self {
        SteadySettings {
            window: STEADY_WINDOW,
            tol: STEADY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSettings {
    pub times: Vec<f64>,
    /// Half-width of the square grid in the `α = x + iy` plane.
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_extent() -> f64 {
    5.0
}

fn default_points() -> usize {
    201
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    dt_measure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    engine: Engine,
    params: SystemParams,
    schedule: Option<ScheduleSection>,
    cutoff: Option<usize>,
    horizon: Option<f64>,
    sample_cadence: Option<f64>,
    step: Option<f64>,
    steady: Option<SteadySettings>,
    outputs: Option<Vec<Output>>,
    wigner: Option<WignerSettings>,
    output_path: Option<PathBuf>,
}

/// A validated experiment with all defaults resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub engine: Engine,
    pub params: SystemParams,
    /// Present exactly for the protocol engines.
    pub schedule: Option<FeedbackSchedule>,
    /// Present exactly for the Fock engines.
    pub cutoff: Option<usize>,
    pub horizon: f64,
    /// Sampling interval for non-protocol engines; protocol engines record
    /// once per measurement.
    pub sample_cadence: Option<f64>,
    /// Integrator step; engine default when absent.
    pub step: Option<f64>,
    pub steady: SteadySettings,
    pub outputs: Vec<Output>,
    pub wigner: Option<WignerSettings>,
    pub output_path: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Parses and validates a configuration. `origin` names the source in
    /// error messages.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        Self::resolve(raw)
    }

    /// Same as [`parse_str`](Self::parse_str) with a generic origin.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::parse_str(text, "<config>")
    }

    fn resolve(raw: RawConfig) -> Result<Self, ConfigError> {
        validate(raw.params)?;
        let engine = raw.engine;
        let horizon = raw.horizon.unwrap_or(DEFAULT_HORIZON);
        let schedule = match (engine.is_protocol(), raw.schedule) {
            (true, section) => {
                let dt = match section.and_then(|s| s.dt_measure) {
                    Some(dt) => dt,
                    None => optimal_dt(&raw.params, 1)?,
                };
                Some(FeedbackSchedule::for_horizon(
                    dt,
                    horizon,
                    engine == Engine::FockFeedback,
                )?)
            }
            (false, Some(_)) => {
                return Err(invalid(format!(
                    "[schedule] is only valid for feedback engines, not {engine}"
                )))
            }
            (false, None) => None,
        };
        let cutoff = match (engine.is_fock(), raw.cutoff) {
            (true, c) => Some(c.unwrap_or_else(|| FockSpace::default_for(raw.params.n_th).cutoff())),
            (false, Some(_)) => return Err(invalid("cutoff is only valid for Fock engines")),
            (false, None) => None,
        };
        let sample_cadence = match (engine.is_protocol(), raw.sample_cadence) {
            (false, c) => Some(c.unwrap_or(DEFAULT_CADENCE)),
            (true, Some(_)) => {
                return Err(invalid(
                    "sample_cadence is not used by feedback engines (one sample per measurement)",
                ))
            }
            (true, None) => None,
        };
        let outputs = raw.outputs.unwrap_or_else(|| vec![Output::Series]);
        let config = ExperimentConfig {
            engine,
            params: raw.params,
            schedule,
            cutoff,
            horizon,
            sample_cadence,
            step: raw.step,
            steady: raw.steady.unwrap_or_default(),
            outputs,
            wigner: raw.wigner,
            output_path: raw.output_path,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks the cross-field rules; also run after programmatic edits.
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate(self.params)?;
        positive("horizon", self.horizon)?;
        if let Some(c) = self.sample_cadence {
            positive("sample_cadence", c)?;
        }
        if let Some(s) = self.step {
            positive("step", s)?;
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        if self.engine.is_protocol() != self.schedule.is_some() {
            return Err(invalid("a schedule is required exactly for feedback engines"));
        }
        if self.engine.is_fock() != self.cutoff.is_some() {
            return Err(invalid("a cutoff is required exactly for Fock engines"));
        }
        if let Some(n) = self.cutoff {
            FockSpace::new(n)?;
        }
        if self.steady.window < 2 {
            return Err(invalid("steady.window must be at least 2"));
        }
        positive("steady.tol", self.steady.tol)?;
        if self.outputs.is_empty() {
            return Err(invalid("outputs must not be empty"));
        }
        let wants_wigner = self.outputs.contains(&Output::Wigner);
        match (&self.wigner, wants_wigner) {
            (Some(_), false) => return Err(invalid("[wigner] given but \"wigner\" is not in outputs")),
            (None, true) => return Err(invalid("\"wigner\" output needs a [wigner] section")),
            _ => {}
        }
        if let Some(w) = &self.wigner {
            if !self.engine.is_fock() {
                return Err(invalid("Wigner grids need a Fock engine"));
            }
            if w.points < 2 {
                return Err(invalid("wigner.points must be at least 2"));
            }
            positive("wigner.extent", w.extent)?;
            if w.times.iter().any(|&t| !(t >= 0.0 && t <= self.horizon)) {
                return Err(invalid("wigner.times must lie within [0, horizon]"));
            }
        }
        if self.engine == Engine::GaussianEffective && self.outputs.contains(&Output::Steady) {
            steady_state_moments(&self.params)?;
        }
        Ok(())
    }

    pub fn space(&self) -> Option<FockSpace> {
        self.cutoff.map(|n| FockSpace::new(n).expect("validated cutoff"))
    }

    /// Replaces the measurement interval, keeping the horizon.
    pub fn with_dt_measure(mut self, dt: f64) -> Result<Self, ConfigError> {
        let s = self
            .schedule
            .ok_or_else(|| invalid(format!("dt_measure does not apply to {}", self.engine)))?;
        self.schedule = Some(FeedbackSchedule::for_horizon(dt, self.horizon, s.enabled)?);
        Ok(self)
    }

    /// Replaces the horizon, rescaling the number of measurement intervals.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self, ConfigError> {
        positive("horizon", horizon)?;
        self.horizon = horizon;
        if let Some(s) = self.schedule {
            self.schedule = Some(FeedbackSchedule::for_horizon(s.dt_measure, horizon, s.enabled)?);
        }
        Ok(self)
    }

    /// Overrides the Fock cutoff; ignored for the Gaussian engine.
    pub fn with_cutoff(mut self, cutoff: usize) -> Result<Self, ConfigError> {
        if self.engine.is_fock() {
            FockSpace::new(cutoff)?;
            self.cutoff = Some(cutoff);
        }
        Ok(self)
    }

    /// Canonical TOML form, as recorded in manifests.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
