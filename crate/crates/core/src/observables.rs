//! Quadrature moments, purity, Wigner functions and the dB conventions.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockSpace, OperatorSet};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMoments {
    pub mean: [f64; 2],
    pub var_x1: f64,
    pub var_x2: f64,
    /// Symmetrised covariance `⟨{x₁, x₂}⟩/2 − ⟨x₁⟩⟨x₂⟩`.
    pub cov: f64,
}

/// Precomputed quadrature operators for repeated moment evaluation.
#[derive(Debug, Clone)]
pub struct QuadratureProbe {
    space: FockSpace,
    x1: crate::linalg::CMatrix,
    x2: crate::linalg::CMatrix,
    x1_sq: crate::linalg::CMatrix,
    x2_sq: crate::linalg::CMatrix,
    sym: crate::linalg::CMatrix,
}

impl QuadratureProbe {
    pub fn new(ops: &OperatorSet) -> Self {
        let x1 = ops.x1.clone();
        let x2 = ops.x2.clone();
        let x1_sq = x1.matmul(&x1);
        let x2_sq = x2.matmul(&x2);
        let sym = (&x1.matmul(&x2) + &x2.matmul(&x1)).scale(C64::new(0.5, 0.0));
        QuadratureProbe {
            space: ops.space(),
            x1,
            x2,
            x1_sq,
            x2_sq,
            sym,
        }
    }

    pub fn measure(&self, rho: &DensityMatrix) -> Result<QuadratureMoments> {
        let osc = rho.oscillator_state(self.space)?;
        let m = osc.matrix();
        let e = |op: &crate::linalg::CMatrix| op.trace_product(m).re;
        let m1 = e(&self.x1);
        let m2 = e(&self.x2);
        Ok(QuadratureMoments {
            mean: [m1, m2],
            var_x1: e(&self.x1_sq) - m1 * m1,
            var_x2: e(&self.x2_sq) - m2 * m2,
            cov: e(&self.sym) - m1 * m2,
        })
    }
}

/// Quadrature means, variances and covariance of the oscillator. Joint
/// states are reduced over the qubit first.
pub fn quadrature_moments(rho: &DensityMatrix, ops: &OperatorSet) -> Result<QuadratureMoments> {
    QuadratureProbe::new(ops).measure(rho)
}

/// `Tr[ρ²]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr[ρ²] = Σ|ρ_ij|² for Hermitian ρ
    rho.matrix().frobenius_sq()
}

/// `10·log₁₀(variance)`; the vacuum maps to 0 dB.
pub fn to_db(variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::InvalidArgument("variance must be positive for dB conversion"));
    }
    Ok(10.0 * libm::log10(variance))
}

/// Variance relative to the thermal baseline, `variance / (1 + 2 n_th)`.
pub fn renormalize(variance: f64, n_th: f64) -> f64 {
    variance / (1.0 + 2.0 * n_th)
}

/// Wigner function sampled on a rectangular grid.
///
/// `values[j][i]` is `W(xs[i], ys[j])`, with `x + iy = α` the coherent
/// amplitude, so `⟨x₁⟩ = 2⟨x⟩` and the vacuum is `(2/π)e^{−2(x² + y²)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerGrid {
    fn spacing(v: &[f64]) -> f64 {
        if v.len() < 2 {
            0.0
        } else {
            (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
        }
    }

    pub fn dx(&self) -> f64 {
        Self::spacing(&self.xs)
    }

    pub fn dy(&self) -> f64 {
        Self::spacing(&self.ys)
    }

    pub fn value_at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy][ix]
    }

    /// Riemann sum `Σ W Δx Δy`.
    pub fn integral(&self) -> f64 {
        let total: f64 = self.values.iter().flat_map(|r| r.iter()).sum();
        total * self.dx() * self.dy()
    }

    /// Marginal `∫ W dy` at each `x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dy = self.dy();
        (0..self.xs.len())
            .map(|i| self.values.iter().map(|row| row[i]).sum::<f64>() * dy)
            .collect()
    }

    /// Marginal `∫ W dx` at each `y`.
    pub fn marginal_y(&self) -> Vec<f64> {
        let dx = self.dx();
        self.values.iter().map(|row| row.iter().sum::<f64>() * dx).collect()
    }

    fn quadrature_variance(coords: &[f64], marginal: &[f64], spacing: f64) -> f64 {
        let norm: f64 = marginal.iter().sum::<f64>() * spacing;
        let mean: f64 = coords.iter().zip(marginal).map(|(x, p)| x * p).sum::<f64>() * spacing / norm;
        let second: f64 = coords.iter().zip(marginal).map(|(x, p)| x * x * p).sum::<f64>() * spacing / norm;
        // x₁ = 2 Re α
        4.0 * (second - mean * mean)
    }

    /// Variance of `x₁` implied by the grid's x-marginal.
    pub fn x1_variance(&self) -> f64 {
        Self::quadrature_variance(&self.xs, &self.marginal_x(), self.dx())
    }

    /// Variance of `x₂` implied by the grid's y-marginal.
    pub fn x2_variance(&self) -> f64 {
        Self::quadrature_variance(&self.ys, &self.marginal_y(), self.dy())
    }
}

const IMAGINARY_TOL: f64 = 1e-10;

/// Evaluates `W(α) = (2/π) Tr[ρ D(α) Π D†(α)]` on the grid `α = x + iy`.
///
/// The displaced-parity matrix elements `⟨m|D(α)ΠD†(α)|n⟩` are generated by
/// their Laguerre recursion over the Fock index, so no truncated
/// displacement operator is exponentiated. Every element has modulus at most
/// one; a larger value means the recursion lost precision at that grid point
/// and the grid is rejected.
pub fn wigner_grid(rho: &DensityMatrix, space: FockSpace, xs: &[f64], ys: &[f64]) -> Result<WignerGrid> {
    let osc = rho.oscillator_state(space)?;
    let m = osc.matrix();
    let n = space.cutoff();
    let two_over_pi = 2.0 / core::f64::consts::PI;
    let sqrt: Vec<f64> = (0..n).map(|k| libm::sqrt(k as f64)).collect();
    let mut elems = alloc::vec![C64::new(0.0, 0.0); n];
    let mut values = Vec::with_capacity(ys.len());
    let mut worst = 0.0_f64;

    for &y in ys {
        let mut row = Vec::with_capacity(xs.len());
        for &x in xs {
            let alpha = C64::new(x, y);
            // elems[n] holds W_{m,n}/(2/π) for the current row m
            elems[0] = C64::new(libm::exp(-2.0 * alpha.norm_sqr()), 0.0);
            for k in 1..n {
                elems[k] = elems[k - 1] * alpha * 2.0 / sqrt[k];
            }
            let mut w = m[(0, 0)] * elems[0];
            for k in 1..n {
                // |0⟩⟨k| and |k⟩⟨0| contributions
                w += m[(0, k)] * elems[k] + m[(k, 0)] * elems[k].conj();
            }
            worst = elems.iter().fold(worst, |acc, z| acc.max(z.norm()));
            for row_m in 1..n {
                let mut prev_row = elems[row_m];
                elems[row_m] = (alpha.conj() * 2.0 * prev_row - elems[row_m - 1] * sqrt[row_m]) / sqrt[row_m];
                w += m[(row_m, row_m)] * elems[row_m];
                for col in (row_m + 1)..n {
                    let next = (alpha * 2.0 * elems[col - 1] - prev_row * sqrt[row_m]) / sqrt[col];
                    prev_row = elems[col];
                    elems[col] = next;
                    w += m[(row_m, col)] * elems[col] + m[(col, row_m)] * elems[col].conj();
                }
                worst = elems[row_m..].iter().fold(worst, |acc, z| acc.max(z.norm()));
            }
            if libm::fabs(w.im) > IMAGINARY_TOL {
                return Err(Error::InvalidState(
                    "Wigner function has an imaginary part (state not Hermitian)",
                ));
            }
            row.push(two_over_pi * w.re);
        }
        values.push(row);
    }
    if worst > 1.0 + 1e-6 {
        return Err(Error::WignerGridTooLarge { modulus: worst });
    }
    Ok(WignerGrid {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        values,
    })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::thermal_state;
    use approx::assert_relative_eq;

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    #[test]
    fn vacuum_moments() {
        let s = space(10);
        let m = quadrature_moments(&thermal_state(0.0, s).unwrap(), &OperatorSet::new(s)).unwrap();
        assert_eq!(m.mean, [0.0, 0.0]);
        assert_relative_eq!(m.var_x1, 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.var_x2, 1.0, epsilon = 1e-14);
        assert!(m.cov.abs() < 1e-15);
    }

    #[test]
    fn thermal_moments_and_purity() {
        let s = space(60);
        for n_th in [0.3, 1.0, 2.5] {
            let rho = thermal_state(n_th, s).unwrap();
            let m = quadrature_moments(&rho, &OperatorSet::new(s)).unwrap();
            assert_relative_eq!(m.var_x1, 1.0 + 2.0 * n_th, epsilon = 1e-4);
            assert_relative_eq!(m.var_x2, 1.0 + 2.0 * n_th, epsilon = 1e-4);
            assert_relative_eq!(purity(&rho), 1.0 / (1.0 + 2.0 * n_th), epsilon = 1e-6);
        }
    }

    #[test]
    fn one_phonon_moments() {
        let s = space(6);
        let m = quadrature_moments(&DensityMatrix::fock(s, 1).unwrap(), &OperatorSet::new(s)).unwrap();
        assert_relative_eq!(m.var_x1, 3.0, epsilon = 1e-14);
        assert_relative_eq!(m.var_x2, 3.0, epsilon = 1e-14);
        assert!(m.cov.abs() < 1e-15);
        assert_eq!(purity(&DensityMatrix::fock(s, 1).unwrap()), 1.0);
    }

    #[test]
    fn joint_states_are_reduced_first() {
        let s = space(6);
        let joint = DensityMatrix::with_qubit(crate::fock::GROUND, &DensityMatrix::fock(s, 1).unwrap());
        let m = quadrature_moments(&joint, &OperatorSet::new(s)).unwrap();
        assert_relative_eq!(m.var_x1, 3.0, epsilon = 1e-14);
        let wrong = DensityMatrix::fock(space(5), 1).unwrap();
        assert!(quadrature_moments(&wrong, &OperatorSet::new(s)).is_err());
    }

    #[test]
    fn db_conversion() {
        assert_eq!(to_db(1.0).unwrap(), 0.0);
        assert_relative_eq!(to_db(0.6).unwrap(), -2.218487496, epsilon = 1e-9);
        assert_relative_eq!(to_db(0.80488).unwrap(), -0.943, epsilon = 1e-3);
        assert!(to_db(0.0).is_err());
        assert!(to_db(-1.0).is_err());
    }

    #[test]
    fn renormalization() {
        assert_eq!(renormalize(7.0, 3.0), 1.0);
        assert_eq!(renormalize(0.6, 0.0), 0.6);
        assert_relative_eq!(renormalize(4.2, 3.0), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn db_of_renormalized_is_db_minus_thermal_offset() {
        for (v, n) in [(0.6, 0.0), (4.2, 3.0), (1.3, 0.25), (12.0, 7.5)] {
            let lhs = to_db(renormalize(v, n)).unwrap();
            let rhs = to_db(v).unwrap() - 10.0 * (1.0 + 2.0 * n).log10();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn vacuum_and_thermal_wigner_origin() {
        let s = space(30);
        let w = wigner_grid(&thermal_state(0.0, s).unwrap(), s, &[0.0, 0.5], &[0.0]).unwrap();
        assert_relative_eq!(w.value_at(0, 0), 2.0 / core::f64::consts::PI, epsilon = 1e-14);
        assert_relative_eq!(
            w.value_at(1, 0),
            2.0 / core::f64::consts::PI * (-0.5f64).exp(),
            epsilon = 1e-14
        );
        let n_th = 0.8;
        let w = wigner_grid(&thermal_state(n_th, s).unwrap(), s, &[0.0], &[0.0]).unwrap();
        assert_relative_eq!(
            w.value_at(0, 0),
            2.0 / (core::f64::consts::PI * (1.0 + 2.0 * n_th)),
            epsilon = 1e-6
        );
    }

    #[test]
    fn one_phonon_wigner_is_negative_at_origin() {
        let s = space(10);
        let w = wigner_grid(&DensityMatrix::fock(s, 1).unwrap(), s, &[0.0], &[0.0]).unwrap();
        assert_relative_eq!(w.value_at(0, 0), -2.0 / core::f64::consts::PI, epsilon = 1e-14);
    }

    fn coherent(s: FockSpace, beta: C64) -> DensityMatrix {
        let mut amp = alloc::vec::Vec::new();
        let mut c = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
        for k in 0..s.cutoff() {
            if k > 0 {
                c = c * beta / (k as f64).sqrt();
            }
            amp.push(c);
        }
        DensityMatrix::pure(&amp).unwrap()
    }

    #[test]
    fn coherent_state_wigner_peaks_at_its_amplitude() {
        let s = space(30);
        let pts = [-0.5, 0.0, 0.5];
        for beta in [C64::new(0.5, 0.0), C64::new(0.0, 0.5), C64::new(-0.5, 0.5)] {
            let w = wigner_grid(&coherent(s, beta), s, &pts, &pts).unwrap();
            for (iy, &y) in pts.iter().enumerate() {
                for (ix, &x) in pts.iter().enumerate() {
                    let d2 = (x - beta.re).powi(2) + (y - beta.im).powi(2);
                    let expected = 2.0 / core::f64::consts::PI * (-2.0 * d2).exp();
                    assert!((w.value_at(ix, iy) - expected).abs() < 1e-12, "beta={beta} x={x} y={y}");
                }
            }
            let m = quadrature_moments(&coherent(s, beta), &OperatorSet::new(s)).unwrap();
            assert_relative_eq!(m.mean[0], 2.0 * beta.re, epsilon = 1e-12);
            assert_relative_eq!(m.mean[1], 2.0 * beta.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn wigner_grid_normalizes() {
        let s = space(40);
        let xs = linspace(-4.0, 4.0, 161);
        for n_th in [0.0, 0.5] {
            let w = wigner_grid(&thermal_state(n_th, s).unwrap(), s, &xs, &xs).unwrap();
            assert!((w.integral() - 1.0).abs() < 1e-3);
            assert_relative_eq!(w.x1_variance(), 1.0 + 2.0 * n_th, epsilon = 1e-3);
        }
    }
}
