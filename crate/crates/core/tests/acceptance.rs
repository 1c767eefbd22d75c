//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs are shared between criteria, so this is a plain `main` rather than a
//! libtest harness. The process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use qsqueeze::feedback::{
    detect_steady_state_values, optimal_dt, FeedbackLoop, FeedbackSchedule, ProtocolRecord, ProtocolSettings,
    STEADY_TOL, STEADY_WINDOW,
};
use qsqueeze::fock::{build_h1, build_h_eff, evolve_with, thermal_state, EXCITED, GROUND};
use qsqueeze::gaussian::{effective_drift_diffusion, evolve_moments, solve_lyapunov_steady};
use qsqueeze::observables::{linspace, to_db, wigner_grid, QuadratureProbe};
use qsqueeze::params::{renormalized_variance, steady_state_moments};
use qsqueeze::{DensityMatrix, FockSpace, GaussianState, OperatorSet, QuadratureMoments, QubitSign, SystemParams};

const WORKING_POINT: SystemParams = SystemParams::new(0.1, 8.0, 1.0, 0.1, 0.0);
const FEEDBACK_HORIZON: f64 = 150.0;
const FEEDBACK_CUTOFF: usize = 40;
const NO_FEEDBACK_CYCLES: usize = 20;
const NO_FEEDBACK_CUTOFF: usize = 100;
const UNCERTAINTY_TOL: f64 = 1e-9;

type Check = Result<String, String>;
type Run = Result<ProtocolRun, String>;

/// Tally of invariant checks made along every run.
#[derive(Default)]
struct Invariants {
    checks: usize,
    violations: Vec<String>,
}

impl Invariants {
    fn state(&mut self, label: &str, t: f64, rho: &DensityMatrix) {
        self.checks += 1;
        if let Err(e) = rho.check() {
            self.violations.push(format!("{label} t={t:.3}: {e}"));
        }
    }

    fn moments(&mut self, label: &str, t: f64, m: &QuadratureMoments) {
        self.checks += 1;
        let det = m.var_x1 * m.var_x2 - m.cov * m.cov;
        if det < 1.0 - UNCERTAINTY_TOL {
            self.violations.push(format!("{label} t={t:.3}: det = {det}"));
        }
    }

    fn gaussian(&mut self, label: &str, t: f64, s: &GaussianState) {
        self.checks += 1;
        if !s.is_physical(UNCERTAINTY_TOL) {
            self.violations.push(format!("{label} t={t:.3}: det = {}", s.det()));
        }
    }
}

struct ProtocolRun {
    records: Vec<ProtocolRecord>,
    /// Oscillator states at the requested snapshot times.
    snapshots: Vec<(f64, DensityMatrix)>,
}

impl ProtocolRun {
    fn var_x1(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.moments.var_x1).collect()
    }

    fn tail_mean(&self, f: impl Fn(&ProtocolRecord) -> f64) -> f64 {
        let tail = &self.records[self.records.len() - STEADY_WINDOW..];
        tail.iter().map(f).sum::<f64>() / tail.len() as f64
    }

    /// Detected steady `var_x1`, or an error when not converged.
    fn steady_var_x1(&self) -> Result<f64, String> {
        let ss = detect_steady_state_values(&self.var_x1(), STEADY_WINDOW, STEADY_TOL).map_err(|e| e.to_string())?;
        if ss.steady {
            Ok(ss.value)
        } else {
            Err(format!("no steady state (window mean {:.5})", ss.value))
        }
    }
}

fn protocol(
    label: &str,
    params: SystemParams,
    cutoff: usize,
    n_intervals: usize,
    enabled: bool,
    snapshot_times: &[f64],
    inv: &mut Invariants,
) -> Run {
    let space = FockSpace::new(cutoff).map_err(|e| e.to_string())?;
    let dt = optimal_dt(&params, 1).map_err(|e| e.to_string())?;
    let schedule = FeedbackSchedule::new(dt, n_intervals, enabled).map_err(|e| e.to_string())?;
    let initial = thermal_state(params.n_th, space).map_err(|e| e.to_string())?;
    let settings = ProtocolSettings {
        step: None,
        check_invariants: true,
    };
    let mut fb = FeedbackLoop::new(&params, space, schedule, &initial, settings).map_err(|e| e.to_string())?;
    let mut snapshots = Vec::new();
    let mut pending = snapshot_times.iter().copied().peekable();
    let mut records = Vec::with_capacity(n_intervals);
    while !fb.is_finished() {
        let t0 = fb.time();
        while let Some(&t) = pending.peek() {
            if t > t0 + dt + 1e-9 {
                break;
            }
            let mut copy = fb.clone();
            copy.evolve_unmeasured(t - t0).map_err(|e| format!("{label}: {e}"))?;
            snapshots.push((t, copy.oscillator_state().map_err(|e| e.to_string())?));
            pending.next();
        }
        let r = fb
            .next_interval()
            .map_err(|e| format!("{label} at t={:.3}: {e}", fb.time()))?;
        inv.state(label, r.time, &fb.state());
        inv.moments(label, r.time, &r.moments);
        records.push(r);
    }
    Ok(ProtocolRun { records, snapshots })
}

fn feedback_intervals(params: &SystemParams) -> usize {
    FeedbackSchedule::for_horizon(optimal_dt(params, 1).unwrap(), FEEDBACK_HORIZON, true)
        .unwrap()
        .n_intervals
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn criterion_1() -> Check {
    let strategy = (1e-3..10.0f64, 1e-2..100.0f64, 0.0..5.0f64, 1e-3..5.0f64, 0.0..10.0f64)
        .prop_map(|(wm, wa, g, gam, n)| SystemParams::new(wm, wa, g, gam, n));
    let mut runner = TestRunner::deterministic();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let closed = steady_state_moments(&p).map_err(|e| e.to_string())?;
        let dd = effective_drift_diffusion(&p, QubitSign::Excited).map_err(|e| e.to_string())?;
        let s = solve_lyapunov_steady(&dd).map_err(|e| format!("{p:?}: {e}"))?.state();
        let err = rel_err(s.var_x1(), closed.var_x1)
            .max(rel_err(s.var_x2(), closed.var_x2))
            .max(rel_err(s.covariance(), closed.cov_x1x2));
        worst = worst.max(err);
    }
    if worst <= 1e-10 {
        Ok(format!("1000 parameter sets, max scaled deviation {worst:.2e}"))
    } else {
        Err(format!("max scaled deviation {worst:.2e} > 1e-10"))
    }
}

fn criterion_2(inv: &mut Invariants) -> Check {
    let p = WORKING_POINT.with_omega_a(15.0);
    let dd = effective_drift_diffusion(&p, QubitSign::Excited).map_err(|e| e.to_string())?;
    let traj = evolve_moments(
        &GaussianState::vacuum(),
        &dd,
        600.0,
        qsqueeze::gaussian::default_step(&p),
        10.0,
    )
    .map_err(|e| e.to_string())?;
    for (t, s) in &traj {
        inv.gaussian("gaussian omega_a=15", *t, s);
    }
    let v = traj.last().unwrap().1.var_x1();
    let exact = steady_state_moments(&p).unwrap().var_x1;
    let detail = format!("var_x1(600) = {v:.7}, closed form {exact:.7}");
    if (v - exact).abs() <= 1e-6 && (v * 1e4).round() == 6596.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3(inv: &mut Invariants) -> Check {
    let p = WORKING_POINT.with_omega_a(50.0);
    let space = FockSpace::new(40).unwrap();
    let h = build_h1(&p, space).map_err(|e| e.to_string())?;
    let rho0 = DensityMatrix::with_qubit(EXCITED, &thermal_state(0.0, space).unwrap());
    let probe = QuadratureProbe::new(&OperatorSet::new(space));
    let mut last = None;
    let mut samples = Vec::new();
    evolve_with(
        &rho0,
        &h,
        &p,
        space,
        50.0,
        qsqueeze::fock::default_step(&p),
        0.5,
        |t, rho| {
            samples.push((t, rho.clone()));
        },
    )
    .map_err(|e| e.to_string())?;
    for (t, rho) in &samples {
        inv.state("full omega_a=50", *t, rho);
        let m = probe.measure(rho).unwrap();
        inv.moments("full omega_a=50", *t, &m);
        last = Some(m.var_x1);
    }
    let db = to_db(last.unwrap()).unwrap();
    let detail = format!(
        "var_x1(50) = {:.5} ({db:.3} dB), target -0.94 dB +/- 0.5",
        last.unwrap()
    );
    if (db + 0.94).abs() <= 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4(fb0: &Run) -> Check {
    let run = fb0.as_ref().map_err(Clone::clone)?;
    let v = run.steady_var_x1()?;
    let db = to_db(v).unwrap();
    let target = to_db(0.6).unwrap();
    let detail = format!("steady var_x1 = {v:.5} ({db:.3} dB), target {target:.3} dB +/- 0.5");
    if (db - target).abs() <= 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5(nofb0: &Run) -> Check {
    let run = nofb0.as_ref().map_err(Clone::clone)?;
    let v = run.records.last().unwrap().moments.var_x1;
    let t = run.records.last().unwrap().time;
    let grows = run
        .records
        .windows(2)
        .rev()
        .take(5)
        .all(|w| w[1].moments.var_x1 > w[0].moments.var_x1);
    let detail = format!("var_x1({t:.2}) = {v:.4}, still growing: {grows}");
    if v >= 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6(inv: &mut Invariants) -> Check {
    let p = WORKING_POINT;
    let t = p.qubit_period();
    let grid: Vec<f64> = (1..=40).map(|k| k as f64 * 2.5 * t / 40.0).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &dt in &grid {
        let n = FeedbackSchedule::for_horizon(dt, FEEDBACK_HORIZON, true)
            .unwrap()
            .n_intervals;
        let label = format!("sweep dt={dt:.4}");
        let space = FockSpace::new(FEEDBACK_CUTOFF).unwrap();
        let schedule = FeedbackSchedule::new(dt, n, true).unwrap();
        let initial = thermal_state(0.0, space).unwrap();
        let mut fb =
            FeedbackLoop::new(&p, space, schedule, &initial, ProtocolSettings::default()).map_err(|e| e.to_string())?;
        let mut v = Vec::with_capacity(n);
        while !fb.is_finished() {
            let r = fb.next_interval().map_err(|e| format!("{label}: {e}"))?;
            inv.moments(&label, r.time, &r.moments);
            v.push(r.moments.var_x1);
        }
        inv.state(&label, fb.time(), &fb.state());
        let ss = detect_steady_state_values(&v, STEADY_WINDOW, STEADY_TOL).map_err(|e| e.to_string())?;
        if !ss.steady {
            return Err(format!("{label} did not converge"));
        }
        values.push(ss.value);
    }
    let minima: Vec<usize> = (1..values.len() - 1)
        .filter(|&k| values[k] < values[k - 1] && values[k] < values[k + 1])
        .collect();
    let near = |target: f64| minima.iter().any(|&k| (grid[k] - target).abs() <= grid[0] + 1e-12);
    let listed: Vec<String> = minima
        .iter()
        .map(|&k| format!("{:.4}T ({:.4})", grid[k] / t, values[k]))
        .collect();
    let detail = format!("interior minima at {}", listed.join(", "));
    if near(t) && near(2.0 * t) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7(runs: &[(f64, &Run, &Run)]) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n_th, fb, nofb) in runs {
        let fb = fb.as_ref().map_err(Clone::clone)?;
        let nofb = nofb.as_ref().map_err(Clone::clone)?;
        let steady_pe = fb.tail_mean(|r| r.p_e);
        let cycles = NO_FEEDBACK_CYCLES;
        // both runs share the first interval, so the first measurement coincides
        let lower = (1..cycles).all(|k| nofb.records[k].p_e < fb.records[k].p_e);
        let decreasing = nofb.records[..cycles].windows(2).all(|w| w[1].p_e < w[0].p_e);
        ok &= steady_pe >= 0.95 && lower && decreasing;
        parts.push(format!(
            "n_th={n_th}: steady p_e {steady_pe:.4}, no-feedback p_e {:.4} after {cycles} cycles (lower {lower}, decreasing {decreasing})",
            nofb.records[cycles - 1].p_e
        ));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn criterion_8(thermal: &[(f64, &Run)]) -> Check {
    let mut v = Vec::new();
    for (n_th, run) in thermal {
        v.push((*n_th, run.as_ref().map_err(Clone::clone)?.steady_var_x1()?));
    }
    let detail = v
        .iter()
        .map(|(n, x)| format!("n_th={n}: {x:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    let get = |n: f64| v.iter().find(|(m, _)| *m == n).unwrap().1;
    if get(0.2) < 1.0 && get(0.4) >= 1.0 && (get(0.3) - 1.0).abs() <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9(thermal: &[(f64, &Run)]) -> Check {
    let mut r_db = Vec::new();
    for (n_th, run) in thermal {
        let v = run.as_ref().map_err(Clone::clone)?.steady_var_x1()?;
        r_db.push(to_db(v / (1.0 + 2.0 * n_th)).unwrap());
    }
    let spread =
        r_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - r_db.iter().cloned().fold(f64::INFINITY, f64::min);
    let reference: Vec<f64> = thermal
        .iter()
        .map(|(n, _)| renormalized_variance(&WORKING_POINT.with_n_th(*n)).unwrap())
        .collect();
    let ref_spread = reference.iter().map(|r| (r - reference[0]).abs()).fold(0.0, f64::max);
    let detail = format!(
        "renormalized steady variance {:?} dB, spread {spread:.4} dB; reference spread {ref_spread:.1e}",
        r_db.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    if spread <= 0.1 && ref_spread <= 4.0 * f64::EPSILON * reference[0] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_10(fb0: &Run, nofb0: &Run) -> Check {
    let fb = fb0.as_ref().map_err(Clone::clone)?;
    let nofb = nofb0.as_ref().map_err(Clone::clone)?;
    let with = fb.tail_mean(|r| r.purity);
    let without = nofb.records.last().unwrap().purity;
    let detail = format!("purity with feedback {with:.4}, without {without:.4}");
    if with > without {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_11(fb0: &Run) -> Check {
    let run = fb0.as_ref().map_err(Clone::clone)?;
    let space = FockSpace::new(FEEDBACK_CUTOFF).unwrap();
    let probe = QuadratureProbe::new(&OperatorSet::new(space));
    let axis = linspace(-5.0, 5.0, 201);
    let mut parts = Vec::new();
    let mut ok = true;
    for (t, osc) in &run.snapshots {
        let grid = wigner_grid(osc, space, &axis, &axis).map_err(|e| e.to_string())?;
        let norm = grid.integral();
        ok &= (norm - 1.0).abs() <= 1e-3;
        if *t == 0.0 {
            let origin = grid.value_at(100, 100);
            let vx = grid.x1_variance();
            let vy = grid.x2_variance();
            ok &= (origin - 2.0 / PI).abs() <= 1e-3 && (vx - vy).abs() <= 1e-3 * vx;
            parts.push(format!(
                "t=0: W(0,0)={origin:.6}, variances {vx:.5}/{vy:.5}, norm {norm:.6}"
            ));
        } else {
            let grid_var = grid.x1_variance();
            let exact = probe.measure(osc).unwrap().var_x1;
            if *t == 70.0 {
                ok &= grid_var < 1.0 && (grid_var - exact).abs() <= 0.01 * exact;
            }
            parts.push(format!(
                "t={t}: grid var_x1 {grid_var:.5} vs {exact:.5}, norm {norm:.6}"
            ));
        }
    }
    ok &= run.snapshots.len() == 3;
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn criterion_12(inv: &mut Invariants) -> Check {
    let p = WORKING_POINT;
    let space = FockSpace::new(40).unwrap();
    let h = build_h_eff(&p, space).map_err(|e| e.to_string())?;
    let rho0 = DensityMatrix::with_qubit(EXCITED, &thermal_state(0.0, space).unwrap());
    let probe = QuadratureProbe::new(&OperatorSet::new(space));
    let mut fock = Vec::new();
    let mut max_ground = 0.0f64;
    evolve_with(
        &rho0,
        &h,
        &p,
        space,
        100.0,
        qsqueeze::fock::default_step(&p),
        1.0,
        |t, rho| {
            inv.state("frozen qubit", t, rho);
            max_ground = max_ground.max(rho.qubit_population(space, GROUND).unwrap());
            fock.push((t, probe.measure(rho).unwrap()));
        },
    )
    .map_err(|e| e.to_string())?;
    let dd = effective_drift_diffusion(&p, QubitSign::Excited).unwrap();
    let gauss = evolve_moments(
        &GaussianState::vacuum(),
        &dd,
        100.0,
        qsqueeze::gaussian::default_step(&p),
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for ((tf, m), (tg, s)) in fock.iter().zip(&gauss) {
        assert!((tf - tg).abs() < 1e-9);
        inv.moments("frozen qubit", *tf, m);
        inv.gaussian("gaussian omega_a=8", *tg, s);
        worst = worst
            .max((m.var_x1 - s.var_x1()).abs())
            .max((m.var_x2 - s.var_x2()).abs())
            .max((m.cov - s.covariance()).abs());
    }
    let detail = format!(
        "{} samples over [0, 100], max moment deviation {worst:.2e}, max |g> population {max_ground:.1e}",
        fock.len()
    );
    if worst <= 1e-4 && fock.len() == gauss.len() && max_ground <= 1e-14 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut inv = Invariants::default();
    let mut results: Vec<(u8, &str, Check)> = Vec::new();

    results.push((1, "closed-form oracle", criterion_1()));
    results.push((2, "effective-model squeezing", criterion_2(&mut inv)));
    results.push((3, "full model at large detuning", criterion_3(&mut inv)));

    let wp = WORKING_POINT;
    let n = feedback_intervals(&wp);
    let fb0 = protocol(
        "feedback n_th=0",
        wp,
        FEEDBACK_CUTOFF,
        n,
        true,
        &[0.0, 7.0, 70.0],
        &mut inv,
    );
    let nofb0 = protocol(
        "no feedback n_th=0",
        wp,
        NO_FEEDBACK_CUTOFF,
        NO_FEEDBACK_CYCLES,
        false,
        &[],
        &mut inv,
    );
    let p02 = wp.with_n_th(0.2);
    let fb02 = protocol("feedback n_th=0.2", p02, FEEDBACK_CUTOFF, n, true, &[], &mut inv);
    let nofb02 = protocol(
        "no feedback n_th=0.2",
        p02,
        NO_FEEDBACK_CUTOFF,
        NO_FEEDBACK_CYCLES,
        false,
        &[],
        &mut inv,
    );
    let fb03 = protocol(
        "feedback n_th=0.3",
        wp.with_n_th(0.3),
        FEEDBACK_CUTOFF,
        n,
        true,
        &[],
        &mut inv,
    );
    let fb04 = protocol(
        "feedback n_th=0.4",
        wp.with_n_th(0.4),
        FEEDBACK_CUTOFF,
        n,
        true,
        &[],
        &mut inv,
    );

    results.push((4, "feedback steady state", criterion_4(&fb0)));
    results.push((5, "no-feedback failure", criterion_5(&nofb0)));
    results.push((6, "measurement interval optimality", criterion_6(&mut inv)));
    results.push((
        7,
        "survival probability",
        criterion_7(&[(0.0, &fb0, &nofb0), (0.2, &fb02, &nofb02)]),
    ));
    let thermal = [(0.2, &fb02), (0.3, &fb03), (0.4, &fb04)];
    results.push((8, "thermal threshold", criterion_8(&thermal)));
    results.push((9, "renormalized-variance insensitivity", criterion_9(&thermal)));
    results.push((10, "purity contrast", criterion_10(&fb0, &nofb0)));
    results.push((11, "Wigner properties", criterion_11(&fb0)));
    results.push((12, "representation cross-check", criterion_12(&mut inv)));

    let c13 = if inv.violations.is_empty() {
        Ok(format!("{} checks, no violations", inv.checks))
    } else {
        Err(format!(
            "{} of {} checks violated, first: {}",
            inv.violations.len(),
            inv.checks,
            inv.violations[0]
        ))
    };
    results.push((13, "invariant suite", c13));

    let mut failed = 0;
    for (id, name, check) in &results {
        match check {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0} s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
