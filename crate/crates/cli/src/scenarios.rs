//! Preset scenarios and their run settings.
//!
//! All presets use `g = 1`, `ω_m = γ = 0.1` and start from `|e⟩` with the
//! oscillator in equilibrium with its bath.

use qsqueeze::feedback::optimal_dt;
use qsqueeze::{FeedbackSchedule, FockSpace, SystemParams};

use crate::config::{ConfigError, Engine, ExperimentConfig, Output, SteadySettings, WignerSettings, DEFAULT_CADENCE};
use crate::sweep::Axis;

pub const NAMES: [&str; 10] = [
    "fig1", "fig2a", "fig2b", "fig3a", "fig3b", "fig4", "fig5", "fig6a", "fig6b", "fig7",
];

/// Working point of the feedback presets.
pub const WORKING_POINT: SystemParams = SystemParams::new(0.1, 8.0, 1.0, 0.1, 0.0);

/// Measurement cycles recorded for runs without feedback. Without resets
/// the qubit's ground-state component anti-squeezes the oscillator without
/// bound, so these runs are kept short and given a large cutoff.
pub const NO_FEEDBACK_CYCLES: usize = 20;

/// Horizon of the full-model runs at `ω_a = 8`, which heat up for the same
/// reason.
pub const FULL_MODEL_NEAR_RESONANT_HORIZON: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Run {
        stem: String,
        config: ExperimentConfig,
    },
    Sweep {
        stem: String,
        config: ExperimentConfig,
        axis: Axis,
        values: Vec<f64>,
    },
}

impl Job {
    pub fn stem(&self) -> &str {
        match self {
            Job::Run { stem, .. } | Job::Sweep { stem, .. } => stem,
        }
    }

    pub fn config(&self) -> &ExperimentConfig {
        match self {
            Job::Run { config, .. } | Job::Sweep { config, .. } => config,
        }
    }

    fn config_mut(&mut self) -> &mut ExperimentConfig {
        match self {
            Job::Run { config, .. } | Job::Sweep { config, .. } => config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub jobs: Vec<Job>,
    /// File name of the manifest inside the output directory.
    pub manifest: String,
}

impl Scenario {
    /// Forces one Fock cutoff on every job (the Gaussian engine is left alone).
    pub fn with_cutoff(mut self, cutoff: usize) -> Result<Self, ConfigError> {
        for job in &mut self.jobs {
            let c = job.config_mut();
            *c = c.clone().with_cutoff(cutoff)?;
        }
        Ok(self)
    }
}

/// Builds a configuration with the documented defaults for `engine`.
pub fn experiment(engine: Engine, params: SystemParams, horizon: f64) -> Result<ExperimentConfig, ConfigError> {
    let schedule = if engine.is_protocol() {
        Some(FeedbackSchedule::for_horizon(
            optimal_dt(&params, 1)?,
            horizon,
            engine == Engine::FockFeedback,
        )?)
    } else {
        None
    };
    let config = ExperimentConfig {
        engine,
        params,
        schedule,
        cutoff: engine.is_fock().then(|| FockSpace::default_for(params.n_th).cutoff()),
        horizon,
        sample_cadence: (!engine.is_protocol()).then_some(DEFAULT_CADENCE),
        step: None,
        steady: SteadySettings::default(),
        outputs: vec![Output::Series],
        wigner: None,
        output_path: None,
    };
    config.validate()?;
    Ok(config)
}

fn run(stem: impl Into<String>, config: ExperimentConfig) -> Job {
    Job::Run {
        stem: stem.into(),
        config,
    }
}

fn steady(mut c: ExperimentConfig) -> ExperimentConfig {
    c.outputs = vec![Output::Series, Output::Steady];
    c
}

fn label(n_th: f64) -> String {
    format!("nth{n_th}")
}

fn feedback(params: SystemParams) -> Result<ExperimentConfig, ConfigError> {
    let mut c = experiment(Engine::FockFeedback, params, crate::config::DEFAULT_HORIZON)?;
    c.cutoff = Some(feedback_cutoff(params.n_th));
    Ok(steady(c))
}

/// Cutoff for the feedback runs. The anti-squeezed variance grows like
/// `1 + 2 n_th`, so hot baths need far more levels than the thermal state.
pub fn feedback_cutoff(n_th: f64) -> usize {
    match n_th {
        n if n <= 0.5 => 40,
        n if n <= 1.0 => 60,
        n if n <= 3.0 => 100,
        n if n <= 5.0 => 130,
        _ => 180,
    }
}

/// Cutoff for runs without resets (no feedback, or the full model near
/// resonance) over [`NO_FEEDBACK_CYCLES`] cycles.
pub fn heating_cutoff(n_th: f64) -> usize {
    match n_th {
        n if n <= 0.5 => 100,
        n if n <= 1.0 => 130,
        n if n <= 3.0 => 180,
        _ => 240,
    }
}

fn no_feedback(params: SystemParams) -> Result<ExperimentConfig, ConfigError> {
    let horizon = NO_FEEDBACK_CYCLES as f64 * optimal_dt(&params, 1)?;
    let mut c = experiment(Engine::FockNoFeedback, params, horizon)?;
    c.cutoff = Some(heating_cutoff(params.n_th));
    Ok(c)
}

fn effective(params: SystemParams, horizon: f64) -> Result<ExperimentConfig, ConfigError> {
    Ok(steady(experiment(Engine::GaussianEffective, params, horizon)?))
}

/// Δt grid of 40 points spanning `(0, 2.5T]`.
pub fn dt_grid(params: &SystemParams) -> Vec<f64> {
    let t = params.qubit_period();
    (1..=40).map(|k| k as f64 * 2.5 * t / 40.0).collect()
}

pub fn preset(name: &str) -> Result<Scenario, ConfigError> {
    let wp = WORKING_POINT;
    let jobs = match name {
        "fig1" => vec![run("fig1_effective", effective(wp.with_omega_a(15.0), 150.0)?)],
        "fig2a" | "fig2b" => {
            let (omega_a, horizon) = if name == "fig2a" {
                (50.0, 100.0)
            } else {
                (8.0, FULL_MODEL_NEAR_RESONANT_HORIZON)
            };
            let p = wp.with_omega_a(omega_a);
            let mut jobs = vec![run(format!("{name}_effective"), effective(p, 100.0)?)];
            for n_th in [0.2, 0.3, 0.4, 3.0] {
                let mut c = experiment(Engine::FockFull, p.with_n_th(n_th), horizon)?;
                if name == "fig2b" {
                    c.cutoff = Some(heating_cutoff(n_th));
                }
                jobs.push(run(format!("{name}_full_{}", label(n_th)), c));
            }
            jobs
        }
        "fig3a" => vec![Job::Sweep {
            stem: "fig3a_dt_sweep".into(),
            config: feedback(wp)?,
            axis: Axis::DtMeasure,
            values: dt_grid(&wp),
        }],
        "fig3b" | "fig5" => vec![
            run(format!("{name}_feedback"), feedback(wp)?),
            run(format!("{name}_no_feedback"), no_feedback(wp)?),
            run(format!("{name}_effective"), effective(wp, 150.0)?),
        ],
        "fig4" => {
            let mut c = experiment(Engine::FockFeedback, wp, 70.0)?;
            c.outputs = vec![Output::Series, Output::Wigner];
            c.wigner = Some(WignerSettings {
                times: vec![0.0, 7.0, 70.0],
                extent: 5.0,
                points: 201,
            });
            c.validate()?;
            vec![run("fig4_feedback", c)]
        }
        "fig6a" | "fig6b" => {
            let mut jobs = vec![run(format!("{name}_effective"), effective(wp, 150.0)?)];
            for n_th in [0.2, 0.3, 0.4, 1.0, 3.0, 5.0] {
                jobs.push(run(
                    format!("{name}_feedback_{}", label(n_th)),
                    feedback(wp.with_n_th(n_th))?,
                ));
            }
            jobs
        }
        "fig7" => {
            let mut jobs = Vec::new();
            for n_th in [0.0, 0.2, 1.0, 3.0] {
                let p = wp.with_n_th(n_th);
                jobs.push(run(format!("fig7_feedback_{}", label(n_th)), feedback(p)?));
                jobs.push(run(format!("fig7_no_feedback_{}", label(n_th)), no_feedback(p)?));
            }
            jobs
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown scenario {other:?}; expected one of {} or custom",
                NAMES.join(", ")
            )))
        }
    };
    Ok(Scenario {
        name: name.to_string(),
        jobs,
        manifest: "manifest.toml".into(),
    })
}

/// Wraps a user configuration; `stem` names the output files.
pub fn custom(stem: &str, config: ExperimentConfig) -> Scenario {
    Scenario {
        name: format!("custom:{stem}"),
        manifest: format!("{stem}.manifest.toml"),
        jobs: vec![run(stem, config)],
    }
}

/// A single sweep over `axis`; `stem` names the summary table.
pub fn sweep(stem: &str, config: ExperimentConfig, axis: Axis, values: Vec<f64>) -> Scenario {
    Scenario {
        name: format!("sweep:{stem}"),
        manifest: format!("{stem}.manifest.toml"),
        jobs: vec![Job::Sweep {
            stem: stem.to_string(),
            config,
            axis,
            values,
        }],
    }
}
