//! First- and second-moment dynamics of the oscillator under the effective
//! quadratic Hamiltonian with thermal damping.
//!
//! Quadratures are `x₁ = a + a†`, `x₂ = i(a† − a)`, so `[x₁, x₂] = 2i` and the
//! vacuum covariance is the identity. With the Hamiltonian written as
//! `r̂ᵀ H r̂ / 2`, the Ehrenfest equations give the drift `A = 2ΩH − (γ/2)I`
//! (`Ω = [[0, 1], [−1, 0]]`) and the diffusion `D = γ(2n_th + 1)I`; the
//! covariance then obeys `σ̇ = Aσ + σAᵀ + D`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    mat2_add, mat2_det, mat2_eigenvalues, mat2_mul, mat2_scale, mat2_transpose, mat2_vec, solve3, Mat2,
};
use crate::params::{validate, SystemParams};

/// Symplectic form.
pub const OMEGA: Mat2 = [[0.0, 1.0], [-1.0, 0.0]];

/// Largest accepted `dt · max|λ(A)|` for the moment integrator.
pub const MAX_STEP_PRODUCT: f64 = 0.1;

/// Default integration step `(2π/ω_a)/200`.
pub fn default_step(params: &SystemParams) -> f64 {
    params.qubit_period() / 200.0
}

/// Qubit eigenvalue substituted for `σ_z` in the effective Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitSign {
    /// Qubit in `|e⟩` (`σ_z → +1`).
    Excited,
    /// Qubit in `|g⟩` (`σ_z → −1`).
    Ground,
}

impl QubitSign {
    pub fn value(self) -> f64 {
        match self {
            QubitSign::Excited => 1.0,
            QubitSign::Ground => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: [f64; 2],
    pub cov: Mat2,
}

impl GaussianState {
    pub fn vacuum() -> Self {
        Self::thermal(0.0)
    }

    pub fn thermal(n_th: f64) -> Self {
        let v = 1.0 + 2.0 * n_th;
        GaussianState {
            mean: [0.0, 0.0],
            cov: [[v, 0.0], [0.0, v]],
        }
    }

    pub fn var_x1(&self) -> f64 {
        self.cov[0][0]
    }

    pub fn var_x2(&self) -> f64 {
        self.cov[1][1]
    }

    pub fn covariance(&self) -> f64 {
        self.cov[0][1]
    }

    pub fn det(&self) -> f64 {
        mat2_det(&self.cov)
    }

    /// Purity `1/√det σ`.
    pub fn purity(&self) -> f64 {
        1.0 / libm::sqrt(self.det())
    }

    /// Rounding error of [`det`](Self::det), which matters once the
    /// variances grow large.
    pub fn det_rounding(&self) -> f64 {
        let c = &self.cov;
        4.0 * f64::EPSILON * (libm::fabs(c[0][0] * c[1][1]) + c[0][1] * c[0][1])
    }

    /// Checks symmetry and `det σ ≥ 1` within `tol` (plus rounding).
    pub fn is_physical(&self, tol: f64) -> bool {
        let scale = 1.0 + libm::fabs(self.cov[0][1]);
        libm::fabs(self.cov[0][1] - self.cov[1][0]) <= tol * scale
            && self.cov[0][0] > 0.0
            && self.cov[1][1] > 0.0
            && self.det() >= 1.0 - tol - self.det_rounding()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub drift: Mat2,
    pub diffusion: Mat2,
}

/// Hamiltonian matrix `H` with `ω_m a†a + s (g²/ω_a) x₁² = r̂ᵀ H r̂ / 2 + const`.
pub fn build_effective_hamiltonian_matrix(params: &SystemParams, sign: QubitSign) -> Result<Mat2> {
    validate(*params)?;
    let half_wm = params.omega_m / 2.0;
    Ok([
        [half_wm + 2.0 * sign.value() * params.dispersive_shift(), 0.0],
        [0.0, half_wm],
    ])
}

pub fn build_drift_diffusion(params: &SystemParams, hamiltonian: &Mat2) -> Result<DriftDiffusion> {
    validate(*params)?;
    if hamiltonian[0][1] != hamiltonian[1][0] {
        return Err(Error::InvalidArgument("hamiltonian matrix must be symmetric"));
    }
    let damping = [[-params.gamma / 2.0, 0.0], [0.0, -params.gamma / 2.0]];
    let drift = mat2_add(&mat2_scale(&mat2_mul(&OMEGA, hamiltonian), 2.0), &damping);
    let d = params.gamma * params.thermal_variance();
    Ok(DriftDiffusion {
        drift,
        diffusion: [[d, 0.0], [0.0, d]],
    })
}

/// Drift and diffusion for the qubit frozen in `sign`.
pub fn effective_drift_diffusion(params: &SystemParams, sign: QubitSign) -> Result<DriftDiffusion> {
    let h = build_effective_hamiltonian_matrix(params, sign)?;
    build_drift_diffusion(params, &h)
}

/// True iff every eigenvalue of the drift has a strictly negative real part.
pub fn is_stable(dd: &DriftDiffusion) -> bool {
    mat2_eigenvalues(&dd.drift).iter().all(|&(re, _)| re < 0.0)
}

fn spectral_radius(a: &Mat2) -> f64 {
    mat2_eigenvalues(a)
        .iter()
        .map(|&(re, im)| libm::hypot(re, im))
        .fold(0.0, f64::max)
}

/// Stationary covariance of the algebraic Lyapunov equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyCovariance {
    pub cov: Mat2,
    /// False when the solution violates `det σ ≥ 1` (e.g. zero diffusion).
    pub physical: bool,
}

impl SteadyCovariance {
    pub fn state(&self) -> GaussianState {
        GaussianState {
            mean: [0.0, 0.0],
            cov: self.cov,
        }
    }
}

/// Solves `Aσ + σAᵀ + D = 0` for symmetric `σ` as a 3×3 linear system in
/// `(σ₁₁, σ₁₂, σ₂₂)`.
pub fn solve_lyapunov_steady(dd: &DriftDiffusion) -> Result<SteadyCovariance> {
    if !is_stable(dd) {
        return Err(Error::NotHurwitz);
    }
    let a = &dd.drift;
    let d = &dd.diffusion;
    let m = [
        [2.0 * a[0][0], 2.0 * a[0][1], 0.0],
        [a[1][0], a[0][0] + a[1][1], a[0][1]],
        [0.0, 2.0 * a[1][0], 2.0 * a[1][1]],
    ];
    let b = [-d[0][0], -(d[0][1] + d[1][0]) / 2.0, -d[1][1]];
    let [s11, s12, s22] = solve3(m, b).ok_or(Error::NotHurwitz)?;
    let cov = [[s11, s12], [s12, s22]];
    let physical = GaussianState { mean: [0.0, 0.0], cov }.is_physical(1e-9);
    Ok(SteadyCovariance { cov, physical })
}

fn derivative(dd: &DriftDiffusion, mean: &[f64; 2], cov: &Mat2) -> ([f64; 2], Mat2) {
    let a = &dd.drift;
    let dm = mat2_vec(a, mean);
    let ac = mat2_mul(a, cov);
    let dc = mat2_add(&mat2_add(&ac, &mat2_transpose(&ac)), &dd.diffusion);
    (dm, dc)
}

fn axpy_state(mean: &[f64; 2], cov: &Mat2, h: f64, dm: &[f64; 2], dc: &Mat2) -> ([f64; 2], Mat2) {
    (
        [mean[0] + h * dm[0], mean[1] + h * dm[1]],
        mat2_add(cov, &mat2_scale(dc, h)),
    )
}

fn rk4_step(dd: &DriftDiffusion, state: &GaussianState, h: f64) -> GaussianState {
    let (m0, c0) = (&state.mean, &state.cov);
    let (k1m, k1c) = derivative(dd, m0, c0);
    let (m1, c1) = axpy_state(m0, c0, h / 2.0, &k1m, &k1c);
    let (k2m, k2c) = derivative(dd, &m1, &c1);
    let (m2, c2) = axpy_state(m0, c0, h / 2.0, &k2m, &k2c);
    let (k3m, k3c) = derivative(dd, &m2, &c2);
    let (m3, c3) = axpy_state(m0, c0, h, &k3m, &k3c);
    let (k4m, k4c) = derivative(dd, &m3, &c3);

    let mut mean = [0.0; 2];
    let mut cov = [[0.0; 2]; 2];
    for i in 0..2 {
        mean[i] = m0[i] + h / 6.0 * (k1m[i] + 2.0 * k2m[i] + 2.0 * k3m[i] + k4m[i]);
        for j in 0..2 {
            cov[i][j] = c0[i][j] + h / 6.0 * (k1c[i][j] + 2.0 * k2c[i][j] + 2.0 * k3c[i][j] + k4c[i][j]);
        }
    }
    // symmetric by construction; pin it against roundoff
    let off = (cov[0][1] + cov[1][0]) / 2.0;
    cov[0][1] = off;
    cov[1][0] = off;
    GaussianState { mean, cov }
}

/// Sample times `0, c, 2c, …, t_final` (the final time is always included).
pub fn sample_times(t_final: f64, cadence: f64) -> Vec<f64> {
    let mut times = Vec::new();
    times.push(0.0);
    if t_final <= 0.0 {
        return times;
    }
    let n = libm::floor(t_final / cadence * (1.0 + 1e-12)) as usize;
    for k in 1..=n {
        times.push(k as f64 * cadence);
    }
    if t_final - n as f64 * cadence > 1e-9 * cadence {
        times.push(t_final);
    } else if n >= 1 {
        times[n] = t_final;
    }
    times
}

/// Number of fixed steps of size at most `dt` covering `span`.
pub(crate) fn substeps(span: f64, dt: f64) -> usize {
    let n = libm::ceil(span / dt - 1e-9);
    if n < 1.0 {
        1
    } else {
        n as usize
    }
}

/// Integrates the moment equations with classical RK4.
///
/// Samples are taken every `cadence` time units (plus the final time); the
/// step is shrunk within each sample interval so samples land exactly.
pub fn evolve_moments(
    state: &GaussianState,
    dd: &DriftDiffusion,
    t_final: f64,
    dt: f64,
    cadence: f64,
) -> Result<Vec<(f64, GaussianState)>> {
    if !(dt > 0.0) || !(cadence > 0.0) {
        return Err(Error::InvalidArgument("dt and cadence must be positive"));
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidArgument("t_final must be non-negative"));
    }
    let product = dt * spectral_radius(&dd.drift);
    if product > MAX_STEP_PRODUCT {
        return Err(Error::StepTooLarge { dt, product });
    }
    if !state.is_physical(1e-9) {
        return Err(Error::InvalidState("initial covariance is unphysical"));
    }

    let times = sample_times(t_final, cadence);
    let mut out = Vec::with_capacity(times.len());
    let mut current = *state;
    out.push((0.0, current));
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let n = substeps(span, dt);
        let h = span / n as f64;
        for _ in 0..n {
            current = rk4_step(dd, &current, h);
        }
        out.push((w[1], current));
    }
    Ok(out)
}
