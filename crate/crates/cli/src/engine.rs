//! Runs one configured experiment and condenses it into a summary.

use qsqueeze::feedback::{detect_steady_state, FeedbackLoop, ProtocolSettings};
use qsqueeze::fock::{self, build_h1, thermal_state, Lindbladian, Propagator, EXCITED};
use qsqueeze::gaussian::{self, effective_drift_diffusion, evolve_moments, sample_times};
use qsqueeze::observables::{linspace, purity, wigner_grid, QuadratureProbe};
use qsqueeze::{
    DensityMatrix, Error, FockSpace, GaussianState, OperatorSet, QuadratureMoments, QubitSign, TimeSeries,
    TimeSeriesRow, WignerGrid,
};

use crate::config::{Engine, ExperimentConfig, WignerSettings};

/// Times closer than this are treated as the same event.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub grid: WignerGrid,
    pub moments: QuadratureMoments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub snapshots: Vec<Snapshot>,
    /// Error that stopped the run early; `series` holds the samples taken
    /// before it.
    pub failure: Option<Error>,
}

/// Runs `config`. Errors before the first sample are returned as `Err`;
/// later ones end the run and are stored in [`RunOutput::failure`].
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, Error> {
    match config.engine {
        Engine::GaussianEffective => run_gaussian(config),
        Engine::FockFull => run_full(config),
        Engine::FockFeedback | Engine::FockNoFeedback => run_protocol(config),
    }
}

fn gaussian_moments(s: &GaussianState) -> QuadratureMoments {
    QuadratureMoments {
        mean: s.mean,
        var_x1: s.var_x1(),
        var_x2: s.var_x2(),
        cov: s.covariance(),
    }
}

fn run_gaussian(config: &ExperimentConfig) -> Result<RunOutput, Error> {
    let p = &config.params;
    let dd = effective_drift_diffusion(p, QubitSign::Excited)?;
    let step = config.step.unwrap_or_else(|| gaussian::default_step(p));
    let cadence = config.sample_cadence.expect("validated cadence");
    let traj = evolve_moments(&GaussianState::thermal(p.n_th), &dd, config.horizon, step, cadence)?;
    let mut series = TimeSeries::new();
    let mut failure = None;
    for (t, s) in &traj {
        if !s.is_physical(1e-9) {
            failure = Some(Error::InvalidState("covariance violates the uncertainty bound"));
            break;
        }
        series.push(TimeSeriesRow::new(*t, &gaussian_moments(s), s.purity(), p.n_th, None)?)?;
    }
    Ok(RunOutput {
        series,
        snapshots: Vec::new(),
        failure,
    })
}

struct Observer {
    probe: QuadratureProbe,
    space: FockSpace,
    xs: Vec<f64>,
}

impl Observer {
    fn new(space: FockSpace, wigner: Option<&WignerSettings>) -> Self {
        let xs = wigner
            .map(|w| linspace(-w.extent, w.extent, w.points))
            .unwrap_or_default();
        Observer {
            probe: QuadratureProbe::new(&OperatorSet::new(space)),
            space,
            xs,
        }
    }

    fn row(&self, t: f64, joint: &DensityMatrix, n_th: f64, p_e: Option<f64>) -> Result<TimeSeriesRow, Error> {
        let osc = joint.trace_out_qubit(self.space)?;
        TimeSeriesRow::new(t, &self.probe.measure(&osc)?, purity(&osc), n_th, p_e)
    }

    fn snapshot(&self, t: f64, joint: &DensityMatrix) -> Result<Snapshot, Error> {
        let osc = joint.trace_out_qubit(self.space)?;
        Ok(Snapshot {
            t,
            grid: wigner_grid(&osc, self.space, &self.xs, &self.xs)?,
            moments: self.probe.measure(&osc)?,
        })
    }
}

fn wigner_times(config: &ExperimentConfig) -> Vec<f64> {
    let mut times = config.wigner.as_ref().map(|w| w.times.clone()).unwrap_or_default();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < TIME_EPS);
    times
}

fn initial_joint(config: &ExperimentConfig, space: FockSpace) -> Result<DensityMatrix, Error> {
    Ok(DensityMatrix::with_qubit(
        EXCITED,
        &thermal_state(config.params.n_th, space)?,
    ))
}

fn run_full(config: &ExperimentConfig) -> Result<RunOutput, Error> {
    let p = &config.params;
    let space = config.space().expect("validated cutoff");
    let h = build_h1(p, space)?;
    let step = config.step.unwrap_or_else(|| fock::default_step(p));
    let mut prop = Propagator::new(
        Lindbladian::new(&h, p, space)?,
        space,
        initial_joint(config, space)?,
        step,
    )?;
    let observer = Observer::new(space, config.wigner.as_ref());

    let samples = sample_times(config.horizon, config.sample_cadence.expect("validated cadence"));
    let snaps = wigner_times(config);
    let mut events: Vec<(f64, bool, bool)> = samples.iter().map(|&t| (t, true, false)).collect();
    for &t in &snaps {
        match events.iter_mut().find(|e| (e.0 - t).abs() < TIME_EPS) {
            Some(e) => e.2 = true,
            None => events.push((t, false, true)),
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out = RunOutput {
        series: TimeSeries::new(),
        snapshots: Vec::new(),
        failure: None,
    };
    for (t, sample, snap) in events {
        prop.advance(t - prop.time());
        let state = prop.state();
        let step_result = prop.check_cutoff().and_then(|_| state.check()).and_then(|_| {
            if sample {
                out.series.push(observer.row(t, &state, p.n_th, None)?)?;
            }
            if snap {
                out.snapshots.push(observer.snapshot(t, &state)?);
            }
            Ok(())
        });
        if let Err(e) = step_result {
            log::warn!("{} run stopped at t = {t}: {e}", config.engine);
            out.failure = Some(e);
            break;
        }
    }
    Ok(out)
}

fn run_protocol(config: &ExperimentConfig) -> Result<RunOutput, Error> {
    let p = &config.params;
    let space = config.space().expect("validated cutoff");
    let schedule = config.schedule.expect("validated schedule");
    let settings = ProtocolSettings {
        step: config.step,
        check_invariants: true,
    };
    let initial = thermal_state(p.n_th, space)?;
    let mut fb = FeedbackLoop::new(p, space, schedule, &initial, settings)?;
    let observer = Observer::new(space, config.wigner.as_ref());
    let snaps = wigner_times(config);
    let mut pending = snaps.iter().copied().peekable();

    let mut out = RunOutput {
        series: TimeSeries::new(),
        snapshots: Vec::new(),
        failure: None,
    };
    let start = fb.state();
    out.series.push(observer.row(0.0, &start, p.n_th, Some(1.0))?)?;
    while let Some(&t) = pending.peek() {
        if t > TIME_EPS {
            break;
        }
        out.snapshots.push(observer.snapshot(0.0, &start)?);
        pending.next();
    }

    while !fb.is_finished() {
        let t0 = fb.time();
        let t1 = t0 + schedule.dt_measure;
        // snapshots between measurements come from a copy so the schedule is untouched
        while let Some(&t) = pending.peek() {
            if t > t1 + TIME_EPS {
                break;
            }
            let mut probe = fb.clone();
            let snap = probe
                .evolve_unmeasured(t - t0)
                .and_then(|_| observer.snapshot(t, &probe.state()));
            match snap {
                Ok(s) => out.snapshots.push(s),
                Err(e) => {
                    out.failure = Some(e);
                    return Ok(out);
                }
            }
            pending.next();
        }
        let pushed = fb.next_interval().and_then(|r| {
            out.series
                .push(TimeSeriesRow::new(r.time, &r.moments, r.purity, p.n_th, Some(r.p_e))?)
        });
        if let Err(e) = pushed {
            log::warn!("{} run stopped at t = {}: {e}", config.engine, fb.time());
            out.failure = Some(e);
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    Unconverged,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Unconverged => "unconverged",
            Status::Failed => "failed",
        }
    }
}

/// Steady-state verdict and final values of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub status: Status,
    /// Trailing-window mean of `var_x1`, only when converged.
    pub steady_var_x1: Option<f64>,
    /// Trailing-window mean, whether or not the run converged.
    pub window_mean: Option<f64>,
    pub last: Option<TimeSeriesRow>,
    pub error: Option<String>,
}

impl Summary {
    pub fn failed(error: impl ToString) -> Self {
        Summary {
            status: Status::Failed,
            steady_var_x1: None,
            window_mean: None,
            last: None,
            error: Some(error.to_string()),
        }
    }
}

pub fn summarize(config: &ExperimentConfig, out: &RunOutput) -> Summary {
    let last = out.series.last().copied();
    let detected = detect_steady_state(&out.series, config.steady.window, config.steady.tol).ok();
    let window_mean = detected.map(|d| d.value);
    match &out.failure {
        Some(e) => Summary {
            status: Status::Failed,
            steady_var_x1: None,
            window_mean,
            last,
            error: Some(e.to_string()),
        },
        None => {
            let steady = detected.filter(|d| d.steady).map(|d| d.value);
            Summary {
                status: if steady.is_some() {
                    Status::Converged
                } else {
                    Status::Unconverged
                },
                steady_var_x1: steady,
                window_mean,
                last,
                error: None,
            }
        }
    }
}

/// Runs and summarizes; setup errors become a failed summary.
pub fn run_summary(config: &ExperimentConfig) -> Summary {
    match run(config) {
        Ok(out) => summarize(config, &out),
        Err(e) => Summary::failed(e),
    }
}
