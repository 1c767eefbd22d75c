//! Measure–flip–evolve feedback loop.
//!
//! Starting from `|e⟩⟨e| ⊗ ϱ₀`, the joint system evolves under the full
//! Hamiltonian and the oscillator bath for `Δt`; the qubit is then measured
//! in the `{|e⟩, |g⟩}` basis and flipped back with `σ_x` when found in `|g⟩`.
//! The loop propagates the outcome-averaged state
//!
//! `ρ(t₁) = p_e ϱ_e ⊗ |e⟩⟨e| + p_g ϱ_g ⊗ σ_x|g⟩⟨g|σ_x`,
//!
//! which resets the qubit to `|e⟩` deterministically. Observables are recorded
//! right after each reset.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fock::{self, build_h1, DensityMatrix, FockSpace, Lindbladian, OperatorSet, Propagator, EXCITED, GROUND};
use crate::linalg::CMatrix;
use crate::observables::{purity, QuadratureMoments, QuadratureProbe};
use crate::params::{validate, SystemParams};
use crate::series::{TimeSeries, TimeSeriesRow};

/// Default trailing window (in measurement intervals) for steady-state detection.
pub const STEADY_WINDOW: usize = 20;
/// Default relative spread tolerance for steady-state detection.
pub const STEADY_TOL: f64 = 1e-3;
/// Branch probabilities below this are dropped at a measurement.
pub const BRANCH_UNDERFLOW: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FeedbackSchedule {
    /// Interval between qubit measurements, in units of `1/g`.
    pub dt_measure: f64,
    pub n_intervals: usize,
    /// When false the qubit is observed (for `p_e`) but never reset.
    pub enabled: bool,
}

impl FeedbackSchedule {
    pub fn new(dt_measure: f64, n_intervals: usize, enabled: bool) -> Result<Self> {
        let s = FeedbackSchedule {
            dt_measure,
            n_intervals,
            enabled,
        };
        s.validate()?;
        Ok(s)
    }

    /// Enough intervals of `dt_measure` to reach `horizon`.
    pub fn for_horizon(dt_measure: f64, horizon: f64, enabled: bool) -> Result<Self> {
        if !(dt_measure > 0.0) || !dt_measure.is_finite() {
            return Err(Error::InvalidParameter {
                field: "dt_measure",
                reason: "must be positive",
            });
        }
        let n = libm::ceil(horizon / dt_measure - 1e-9).max(1.0) as usize;
        Self::new(dt_measure, n, enabled)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_measure > 0.0) || !self.dt_measure.is_finite() {
            return Err(Error::InvalidParameter {
                field: "dt_measure",
                reason: "must be positive",
            });
        }
        if self.n_intervals < 1 {
            return Err(Error::InvalidParameter {
                field: "n_intervals",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.dt_measure * self.n_intervals as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolRecord {
    pub time: f64,
    /// Probability of finding the qubit in `|e⟩` at this measurement.
    pub p_e: f64,
    /// Oscillator moments after the reset.
    pub moments: QuadratureMoments,
    /// Oscillator purity after the reset.
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub state: DensityMatrix,
    pub p_e: f64,
    pub p_g: f64,
    /// Qubit level whose branch underflowed and was dropped, if any.
    pub dropped: Option<usize>,
}

/// Measures the qubit, flips it on `|g⟩`, and returns the outcome average
/// `|e⟩⟨e| ⊗ (p_e ϱ_e + p_g ϱ_g)`.
pub fn measure_and_reset(rho: &DensityMatrix, space: FockSpace) -> Result<MeasurementOutcome> {
    let excited = rho.qubit_block(space, EXCITED, EXCITED)?;
    let ground = rho.qubit_block(space, GROUND, GROUND)?;
    let mut p_e = excited.trace().re;
    let mut p_g = ground.trace().re;
    let mut dropped = None;
    let mut osc = CMatrix::zeros(space.cutoff(), space.cutoff());
    if p_e >= BRANCH_UNDERFLOW {
        osc += &excited;
    } else {
        log::warn!("qubit |e> branch underflow (p = {p_e:.3e}); dropped");
        dropped = Some(EXCITED);
    }
    if p_g >= BRANCH_UNDERFLOW {
        osc += &ground;
    } else if dropped.is_none() {
        // a zero-probability |g⟩ branch is the common, silent case
        if p_g != 0.0 {
            log::debug!("qubit |g> branch underflow (p = {p_g:.3e}); dropped");
        }
        dropped = Some(GROUND);
    }
    let total = osc.trace().re;
    if !(total > 0.0) {
        return Err(Error::InvalidState("both measurement branches vanished"));
    }
    match dropped {
        Some(EXCITED) => {
            p_e = 0.0;
            p_g = 1.0;
        }
        Some(_) => {
            p_e = 1.0;
            p_g = 0.0;
        }
        None => {
            let s = p_e + p_g;
            p_e /= s;
            p_g /= s;
        }
    }
    let osc = osc.scale(crate::linalg::C64::new(1.0 / total, 0.0));
    let state = DensityMatrix::with_qubit(EXCITED, &DensityMatrix::from_matrix_unchecked(osc));
    Ok(MeasurementOutcome {
        state,
        p_e,
        p_g,
        dropped,
    })
}

/// Integrator and checking options for protocol runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSettings {
    /// Maximum RK4 step; `None` uses `(2π/ω_a)/100`.
    pub step: Option<f64>,
    /// Validate the density matrix (Hermiticity, trace, positivity) after
    /// every interval.
    pub check_invariants: bool,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        ProtocolSettings {
            step: None,
            check_invariants: true,
        }
    }
}

/// Stepwise driver for the feedback protocol.
#[derive(Debug, Clone)]
pub struct FeedbackLoop {
    propagator: Propagator,
    probe: QuadratureProbe,
    schedule: FeedbackSchedule,
    space: FockSpace,
    settings: ProtocolSettings,
    completed: usize,
}

impl FeedbackLoop {
    pub fn new(
        params: &SystemParams,
        space: FockSpace,
        schedule: FeedbackSchedule,
        initial_osc: &DensityMatrix,
        settings: ProtocolSettings,
    ) -> Result<Self> {
        validate(*params)?;
        schedule.validate()?;
        if initial_osc.dim() != space.cutoff() {
            return Err(Error::DimensionMismatch {
                expected: space.cutoff(),
                got: initial_osc.dim(),
            });
        }
        let h = build_h1(params, space)?;
        let generator = Lindbladian::new(&h, params, space)?;
        let step = settings.step.unwrap_or_else(|| fock::default_step(params));
        let joint = DensityMatrix::with_qubit(EXCITED, initial_osc);
        let propagator = Propagator::new(generator, space, joint, step)?;
        Ok(FeedbackLoop {
            propagator,
            probe: QuadratureProbe::new(&OperatorSet::new(space)),
            schedule,
            space,
            settings,
            completed: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.propagator.time()
    }

    pub fn completed_intervals(&self) -> usize {
        self.completed
    }

    pub fn is_finished(&self) -> bool {
        self.completed >= self.schedule.n_intervals
    }

    /// Current joint state.
    pub fn state(&self) -> DensityMatrix {
        self.propagator.state()
    }

    /// Reduced oscillator state.
    pub fn oscillator_state(&self) -> Result<DensityMatrix> {
        self.propagator.state().trace_out_qubit(self.space)
    }

    /// Moments and purity of the current oscillator state.
    pub fn observe(&self) -> Result<(QuadratureMoments, f64)> {
        let osc = self.oscillator_state()?;
        Ok((self.probe.measure(&osc)?, purity(&osc)))
    }

    /// Evolves one interval, measures (and resets, if enabled) the qubit.
    pub fn next_interval(&mut self) -> Result<ProtocolRecord> {
        self.propagator.advance(self.schedule.dt_measure);
        self.propagator.check_cutoff()?;
        let current = self.propagator.state();
        let p_e = if self.schedule.enabled {
            let outcome = measure_and_reset(&current, self.space)?;
            self.propagator.set_state(outcome.state)?;
            outcome.p_e
        } else {
            current.qubit_population(self.space, EXCITED)?
        };
        if self.settings.check_invariants {
            self.propagator.state().check()?;
        }
        self.completed += 1;
        let (moments, purity) = self.observe()?;
        Ok(ProtocolRecord {
            time: self.propagator.time(),
            p_e,
            moments,
            purity,
        })
    }

    /// Evolves without measuring, e.g. to take a snapshot between two
    /// measurements. The next interval still has the scheduled length.
    pub fn evolve_unmeasured(&mut self, duration: f64) -> Result<()> {
        self.propagator.advance(duration);
        self.propagator.check_cutoff()
    }
}

/// Runs the protocol for `schedule.n_intervals` rounds starting from
/// `|e⟩⟨e| ⊗ initial_osc`.
pub fn run_protocol(
    params: &SystemParams,
    space: FockSpace,
    schedule: FeedbackSchedule,
    initial_osc: &DensityMatrix,
) -> Result<Vec<ProtocolRecord>> {
    run_protocol_with(params, space, schedule, initial_osc, ProtocolSettings::default())
}

pub fn run_protocol_with(
    params: &SystemParams,
    space: FockSpace,
    schedule: FeedbackSchedule,
    initial_osc: &DensityMatrix,
    settings: ProtocolSettings,
) -> Result<Vec<ProtocolRecord>> {
    let mut fb = FeedbackLoop::new(params, space, schedule, initial_osc, settings)?;
    let mut out = Vec::with_capacity(schedule.n_intervals);
    while !fb.is_finished() {
        out.push(fb.next_interval()?);
    }
    Ok(out)
}

/// Measurement interval `2pπ/ω_a`, a multiple of the qubit period.
pub fn optimal_dt(params: &SystemParams, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be a positive integer"));
    }
    Ok(p as f64 * params.qubit_period())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub steady: bool,
    /// Mean over the trailing window.
    pub value: f64,
}

/// Steady when the spread of the trailing `window` values is below
/// `tol · mean`.
pub fn detect_steady_state_values(values: &[f64], window: usize, tol: f64) -> Result<SteadyState> {
    if window < 2 {
        return Err(Error::InvalidArgument("steady-state window must be at least 2"));
    }
    if values.len() < window {
        return Err(Error::SeriesTooShort {
            len: values.len(),
            window,
        });
    }
    let tail = &values[values.len() - window..];
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = tail.iter().sum::<f64>() / window as f64;
    Ok(SteadyState {
        steady: max - min < tol * libm::fabs(mean),
        value: mean,
    })
}

/// Steady-state detection on the `var_x1` column.
pub fn detect_steady_state(series: &TimeSeries, window: usize, tol: f64) -> Result<SteadyState> {
    detect_steady_state_values(&series.var_x1(), window, tol)
}

/// Converts protocol records into a time series with a `p_e` column.
pub fn records_to_series(records: &[ProtocolRecord], n_th: f64) -> Result<TimeSeries> {
    let mut s = TimeSeries::new();
    for r in records {
        s.push(TimeSeriesRow::new(r.time, &r.moments, r.purity, n_th, Some(r.p_e))?)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Converged,
    Unconverged,
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub dt: f64,
    /// Steady `var_x1`; `None` unless the run converged.
    pub steady_var_x1: Option<f64>,
    /// Trailing-window mean, reported for diagnostics even when unconverged.
    pub window_mean: Option<f64>,
    pub status: SweepStatus,
}

/// Feedback run at one measurement interval, classified by the default
/// steady-state detector over its trailing window.
pub fn sweep_point(
    params: &SystemParams,
    space: FockSpace,
    dt: f64,
    horizon: f64,
    settings: ProtocolSettings,
) -> SweepPoint {
    let failed = |e: Error| SweepPoint {
        dt,
        steady_var_x1: None,
        window_mean: None,
        status: SweepStatus::Failed(e),
    };
    let schedule = match FeedbackSchedule::for_horizon(dt, horizon, true) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    let initial = match fock::thermal_state(params.n_th, space) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let records = match run_protocol_with(params, space, schedule, &initial, settings) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let values: Vec<f64> = records.iter().map(|r| r.moments.var_x1).collect();
    match detect_steady_state_values(&values, STEADY_WINDOW, STEADY_TOL) {
        Ok(ss) if ss.steady => SweepPoint {
            dt,
            steady_var_x1: Some(ss.value),
            window_mean: Some(ss.value),
            status: SweepStatus::Converged,
        },
        Ok(ss) => SweepPoint {
            dt,
            steady_var_x1: None,
            window_mean: Some(ss.value),
            status: SweepStatus::Unconverged,
        },
        Err(e) => failed(e),
    }
}

/// Steady `var_x1` for each measurement interval in `dt_grid`.
pub fn sweep_dt(params: &SystemParams, space: FockSpace, dt_grid: &[f64], horizon: f64) -> Result<Vec<SweepPoint>> {
    validate(*params)?;
    if dt_grid.iter().any(|&dt| !(dt > 0.0)) {
        return Err(Error::InvalidArgument("dt grid values must be positive"));
    }
    Ok(dt_grid
        .iter()
        .map(|&dt| sweep_point(params, space, dt, horizon, ProtocolSettings::default()))
        .collect())
}
