//! Physical parameters and the closed-form steady state of the effective model.
//!
//! Frequencies and rates are expressed in units of the coupling `g` by
//! convention (configs set `g = 1`), with `ħ = 1`. The bath occupation is
//! given directly as `n_th`; for a bath at inverse temperature `β` it would be
//! `(e^{β ω_m} − 1)^{-1}`. The oscillator starts in equilibrium with its bath,
//! so the same `n_th` sets its initial thermal occupation.
//!
//! The qubit is eliminated in the dispersive regime `δ = ω_a − ω_m ≫ g`,
//! leaving `H_eff = ω_m a†a + (g²/ω_a) σ_z ⊗ x₁²`. Note that the rotating-frame
//! interaction used in that derivation is usually printed with phases
//! `e^{±iω_a}`; the time argument `t` is implied there.

use crate::error::{Error, Result};

/// Ratio `δ/g` at or below which the dispersive approximation is flagged.
pub const LARGE_DETUNING_RATIO: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SystemParams {
    /// Oscillator angular frequency.
    pub omega_m: f64,
    /// Qubit transition frequency.
    pub omega_a: f64,
    /// Qubit–oscillator coupling.
    pub g: f64,
    /// Oscillator–bath coupling rate.
    pub gamma: f64,
    /// Mean thermal phonon number of the bath.
    pub n_th: f64,
}

impl SystemParams {
    pub const fn new(omega_m: f64, omega_a: f64, g: f64, gamma: f64, n_th: f64) -> Self {
        SystemParams {
            omega_m,
            omega_a,
            g,
            gamma,
            n_th,
        }
    }

    /// Detuning `δ = ω_a − ω_m`.
    #[inline]
    pub fn delta(&self) -> f64 {
        self.omega_a - self.omega_m
    }

    /// Dispersive coupling `g²/ω_a`.
    #[inline]
    pub fn dispersive_shift(&self) -> f64 {
        self.g * self.g / self.omega_a
    }

    /// Qubit period `T = 2π/ω_a`.
    #[inline]
    pub fn qubit_period(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.omega_a
    }

    /// Thermal quadrature variance `1 + 2 n_th`.
    #[inline]
    pub fn thermal_variance(&self) -> f64 {
        1.0 + 2.0 * self.n_th
    }

    pub fn with_n_th(mut self, n_th: f64) -> Self {
        self.n_th = n_th;
        self
    }

    pub fn with_omega_a(mut self, omega_a: f64) -> Self {
        self.omega_a = omega_a;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}

/// Result of [`validate`]: the unchanged parameters plus advisories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validated {
    pub params: SystemParams,
    /// Set when `δ ≤ 5g`, where the effective model is not expected to hold.
    pub large_detuning_advisory: bool,
}

fn check(field: &'static str, value: f64, strictly_positive: bool) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            field,
            reason: "must be finite",
        });
    }
    if strictly_positive && value <= 0.0 {
        return Err(Error::InvalidParameter {
            field,
            reason: "must be positive",
        });
    }
    if !strictly_positive && value < 0.0 {
        return Err(Error::InvalidParameter {
            field,
            reason: "must be non-negative",
        });
    }
    Ok(())
}

pub fn validate(params: SystemParams) -> Result<Validated> {
    check("omega_m", params.omega_m, true)?;
    check("omega_a", params.omega_a, true)?;
    check("g", params.g, false)?;
    check("gamma", params.gamma, false)?;
    check("n_th", params.n_th, false)?;
    let large_detuning_advisory = params.delta() <= LARGE_DETUNING_RATIO * params.g;
    if large_detuning_advisory {
        log::warn!(
            "detuning delta = {} <= {} g: effective model may be inaccurate",
            params.delta(),
            LARGE_DETUNING_RATIO
        );
    }
    Ok(Validated {
        params,
        large_detuning_advisory,
    })
}

/// Steady-state quadrature variances and symmetrised covariance
/// (vacuum variance = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateMoments {
    pub var_x1: f64,
    pub var_x2: f64,
    pub cov_x1x2: f64,
}

impl SteadyStateMoments {
    /// `var_x1·var_x2 − cov²`, bounded below by 1 for physical states.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x1 * self.var_x2 - self.cov_x1x2 * self.cov_x1x2
    }
}

/// Closed-form stationary moments of the oscillator under the effective
/// Hamiltonian with the qubit held in `|e⟩`.
pub fn steady_state_moments(params: &SystemParams) -> Result<SteadyStateMoments> {
    validate(*params)?;
    if params.gamma == 0.0 {
        return Err(Error::NoDissipativeSteadyState);
    }
    let SystemParams {
        omega_m,
        omega_a,
        g,
        gamma,
        ..
    } = *params;
    let g2 = g * g;
    let thermal = params.thermal_variance();
    let damping = gamma * gamma + 4.0 * omega_m * omega_m;
    let denom = 16.0 * g2 * omega_m + omega_a * damping;

    let var_x1 = thermal * (1.0 - 8.0 * g2 * omega_m / denom);
    let var_x2 = thermal
        * (1.0
            + (32.0 * g2 * g2 + 8.0 * g2 * omega_a * omega_m)
                / (16.0 * g2 * omega_m * omega_a + omega_a * omega_a * damping));
    let cov_x1x2 = -4.0 * g2 * gamma * thermal / denom;

    Ok(SteadyStateMoments {
        var_x1,
        var_x2,
        cov_x1x2,
    })
}

/// `var_x1 / (1 + 2 n_th)` at steady state, which does not depend on `n_th`.
pub fn renormalized_variance(params: &SystemParams) -> Result<f64> {
    let m = steady_state_moments(params)?;
    Ok(m.var_x1 / params.thermal_variance())
}
