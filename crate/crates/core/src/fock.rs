//! Truncated-Fock simulation of the qubit⊗oscillator master equation
//!
//! `ρ̇ = −i[H, ρ] + γ(n_th + 1) L[a]ρ + γ n_th L[a†]ρ`,
//! `L[A]ρ = AρA† − {A†A, ρ}/2`.
//!
//! Tensor order is qubit ⊗ oscillator throughout: the joint basis index of
//! `|q, n⟩` is `q·N + n`, with `q = 0` for `|e⟩` and `q = 1` for `|g⟩`, so
//! `σ_z = diag(+1, −1)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian::{sample_times, substeps};
use crate::linalg::{CMatrix, SparseMatrix, C64, I, ONE, ZERO};
use crate::params::{validate, SystemParams};

/// Maximum truncated tail mass of an initial thermal state.
pub const TAIL_TOLERANCE: f64 = 1e-6;
/// Maximum population tolerated in the top Fock level during evolution.
pub const TOP_LEVEL_TOLERANCE: f64 = 1e-6;

/// Qubit basis index of `|e⟩`.
pub const EXCITED: usize = 0;
/// Qubit basis index of `|g⟩`.
pub const GROUND: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    cutoff: usize,
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidArgument("Fock cutoff must be at least 2"));
        }
        Ok(FockSpace { cutoff })
    }

    /// Default cutoff: 40 levels up to `n_th = 1`, 60 up to `n_th = 5`, and
    /// beyond that enough levels for the thermal tail check to pass.
    pub fn default_for(n_th: f64) -> Self {
        let cutoff = if n_th <= 1.0 {
            40
        } else if n_th <= 5.0 {
            60
        } else {
            suggested_cutoff(n_th).max(60) + 20
        };
        FockSpace { cutoff }
    }

    /// Number of oscillator levels `N`.
    #[inline]
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Joint qubit⊗oscillator dimension `2N`.
    #[inline]
    pub fn joint_dim(&self) -> usize {
        2 * self.cutoff
    }

    #[inline]
    pub fn index(&self, qubit: usize, n: usize) -> usize {
        qubit * self.cutoff + n
    }
}

/// Smallest cutoff whose thermal tail mass `(m/(1+m))^N` is below tolerance.
pub fn suggested_cutoff(n_th: f64) -> usize {
    if n_th <= 0.0 {
        return 2;
    }
    let r = n_th / (1.0 + n_th);
    let n = libm::ceil(libm::log(TAIL_TOLERANCE) / libm::log(r));
    (n as usize).max(2)
}

/// Oscillator, qubit and lifted joint operators for a [`FockSpace`].
#[derive(Debug, Clone)]
pub struct OperatorSet {
    space: FockSpace,
    pub annihilate: CMatrix,
    pub create: CMatrix,
    pub x1: CMatrix,
    pub x2: CMatrix,
    pub number: CMatrix,
    pub identity: CMatrix,
    pub sigma_x: CMatrix,
    pub sigma_y: CMatrix,
    pub sigma_z: CMatrix,
    pub sigma_plus: CMatrix,
    pub sigma_minus: CMatrix,
    pub qubit_identity: CMatrix,
}

impl OperatorSet {
    pub fn new(space: FockSpace) -> Self {
        let n = space.cutoff();
        let mut a = CMatrix::zeros(n, n);
        for k in 1..n {
            a[(k - 1, k)] = C64::new(libm::sqrt(k as f64), 0.0);
        }
        let create = a.adjoint();
        let x1 = &a + &create;
        let x2 = (&create - &a).scale(I);
        let number = create.matmul(&a);
        let c = |re: f64, im: f64| C64::new(re, im);
        let sigma_x = CMatrix::from_row_major(2, 2, alloc::vec![ZERO, ONE, ONE, ZERO]);
        let sigma_y = CMatrix::from_row_major(2, 2, alloc::vec![ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]);
        let sigma_z = CMatrix::from_row_major(2, 2, alloc::vec![ONE, ZERO, ZERO, c(-1.0, 0.0)]);
        let sigma_plus = (&sigma_x + &sigma_y.scale(I)).scale(c(0.5, 0.0));
        let sigma_minus = (&sigma_x - &sigma_y.scale(I)).scale(c(0.5, 0.0));
        OperatorSet {
            space,
            annihilate: a,
            create,
            x1,
            x2,
            number,
            identity: CMatrix::identity(n),
            sigma_x,
            sigma_y,
            sigma_z,
            sigma_plus,
            sigma_minus,
            qubit_identity: CMatrix::identity(2),
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// `I₂ ⊗ op`.
    pub fn lift_oscillator(&self, op: &CMatrix) -> CMatrix {
        self.qubit_identity.kron(op)
    }

    /// `op ⊗ I_N`.
    pub fn lift_qubit(&self, op: &CMatrix) -> CMatrix {
        op.kron(&self.identity)
    }
}

/// Hermitian, unit-trace, positive operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    /// Wraps a matrix after checking every invariant.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = DensityMatrix { matrix };
        rho.check()?;
        Ok(rho)
    }

    /// Wraps a matrix without validation; for internal use on states produced
    /// by invariant-preserving maps.
    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn check(&self) -> Result<()> {
        let m = &self.matrix;
        if !m.is_square() {
            return Err(Error::InvalidState("matrix is not square"));
        }
        if m.hermiticity_defect() > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState("not Hermitian"));
        }
        let tr = m.trace();
        if libm::fabs(tr.re - 1.0) > Self::TRACE_TOL || libm::fabs(tr.im) > Self::TRACE_TOL {
            return Err(Error::InvalidState("trace differs from 1"));
        }
        if !m.cholesky_succeeds(Self::POSITIVITY_TOL) {
            return Err(Error::InvalidState("negative eigenvalue below -1e-8"));
        }
        Ok(())
    }

    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let m = CMatrix::from_fn(amplitudes.len(), amplitudes.len(), |i, j| {
            amplitudes[i] * amplitudes[j].conj()
        });
        Self::new(m)
    }

    /// Oscillator Fock state `|n⟩⟨n|`.
    pub fn fock(space: FockSpace, n: usize) -> Result<Self> {
        if n >= space.cutoff() {
            return Err(Error::InvalidArgument("Fock level outside the cutoff"));
        }
        let mut m = CMatrix::zeros(space.cutoff(), space.cutoff());
        m[(n, n)] = ONE;
        Ok(DensityMatrix { matrix: m })
    }

    /// Joint state `|q⟩⟨q| ⊗ ϱ`.
    pub fn with_qubit(qubit: usize, oscillator: &DensityMatrix) -> Self {
        let mut q = CMatrix::zeros(2, 2);
        q[(qubit, qubit)] = ONE;
        DensityMatrix {
            matrix: q.kron(&oscillator.matrix),
        }
    }

    /// `p_e |e⟩⟨e| ⊗ ϱ_e + p_g |g⟩⟨g| ⊗ ϱ_g` style block-diagonal joint state.
    pub fn from_qubit_blocks(excited: &CMatrix, ground: &CMatrix) -> Result<Self> {
        let n = excited.rows();
        if ground.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ground.rows(),
            });
        }
        let mut m = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = excited[(i, j)];
                m[(n + i, n + j)] = ground[(i, j)];
            }
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Block `⟨k|ρ|k'⟩` acting on the oscillator, for a joint state.
    pub fn qubit_block(&self, space: FockSpace, k: usize, k_prime: usize) -> Result<CMatrix> {
        self.expect_dim(space.joint_dim())?;
        let n = space.cutoff();
        Ok(CMatrix::from_fn(n, n, |i, j| self.matrix[(k * n + i, k_prime * n + j)]))
    }

    /// Population `Tr⟨k|ρ|k⟩` of qubit level `k`.
    pub fn qubit_population(&self, space: FockSpace, k: usize) -> Result<f64> {
        self.expect_dim(space.joint_dim())?;
        let n = space.cutoff();
        Ok((0..n).map(|i| self.matrix[(k * n + i, k * n + i)].re).sum())
    }

    /// Reduced oscillator state `Tr_q ρ`.
    pub fn trace_out_qubit(&self, space: FockSpace) -> Result<DensityMatrix> {
        self.expect_dim(space.joint_dim())?;
        let n = space.cutoff();
        let m = CMatrix::from_fn(n, n, |i, j| self.matrix[(i, j)] + self.matrix[(n + i, n + j)]);
        Ok(DensityMatrix { matrix: m })
    }

    /// Reduced 2×2 qubit state `Tr_osc ρ`.
    pub fn trace_out_oscillator(&self, space: FockSpace) -> Result<CMatrix> {
        self.expect_dim(space.joint_dim())?;
        let n = space.cutoff();
        Ok(CMatrix::from_fn(2, 2, |a, b| {
            (0..n).map(|i| self.matrix[(a * n + i, b * n + i)]).sum()
        }))
    }

    /// Oscillator-only view: the state itself if it already lives on the
    /// oscillator space, otherwise the partial trace over the qubit.
    pub fn oscillator_state(&self, space: FockSpace) -> Result<DensityMatrix> {
        if self.dim() == space.cutoff() {
            Ok(self.clone())
        } else if self.dim() == space.joint_dim() {
            self.trace_out_qubit(space)
        } else {
            Err(Error::DimensionMismatch {
                expected: space.cutoff(),
                got: self.dim(),
            })
        }
    }

    /// Population of the highest retained Fock level (summed over the qubit).
    pub fn top_level_population(&self, space: FockSpace) -> f64 {
        top_level_population(&self.matrix, space)
    }

    fn expect_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

fn top_level_population(m: &CMatrix, space: FockSpace) -> f64 {
    let n = space.cutoff();
    let top = n - 1;
    if m.rows() == n {
        m[(top, top)].re
    } else {
        m[(top, top)].re + m[(n + top, n + top)].re
    }
}

/// Thermal oscillator state `Σ m̄ⁿ/(1+m̄)^{n+1} |n⟩⟨n|`, renormalised over the
/// cutoff. Fails if the discarded tail mass exceeds [`TAIL_TOLERANCE`].
pub fn thermal_state(n_th: f64, space: FockSpace) -> Result<DensityMatrix> {
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(Error::InvalidParameter {
            field: "n_th",
            reason: "must be non-negative",
        });
    }
    let n = space.cutoff();
    let ratio = n_th / (1.0 + n_th);
    let tail = libm::pow(ratio, n as f64);
    if tail > TAIL_TOLERANCE {
        return Err(Error::InsufficientCutoff {
            cutoff: n,
            n_th,
            tail,
            suggested: suggested_cutoff(n_th),
        });
    }
    let mut weights = Vec::with_capacity(n);
    let mut w = 1.0 / (1.0 + n_th);
    for _ in 0..n {
        weights.push(w);
        w *= ratio;
    }
    let total: f64 = weights.iter().sum();
    let diag: Vec<C64> = weights.iter().map(|&w| C64::new(w / total, 0.0)).collect();
    Ok(DensityMatrix::from_matrix_unchecked(CMatrix::from_diagonal(&diag)))
}

/// Full qubit–oscillator Hamiltonian
/// `(ω_a/2)σ_z + ω_m(a†a + 1/2) + g σ_x (a + a†)`.
pub fn build_h1(params: &SystemParams, space: FockSpace) -> Result<CMatrix> {
    validate(*params)?;
    let ops = OperatorSet::new(space);
    let qubit = ops.lift_qubit(&ops.sigma_z).scale(C64::new(params.omega_a / 2.0, 0.0));
    let half = ops.identity.scale(C64::new(0.5, 0.0));
    let osc = ops
        .lift_oscillator(&(&ops.number + &half))
        .scale(C64::new(params.omega_m, 0.0));
    let coupling = ops.sigma_x.kron(&ops.x1).scale(C64::new(params.g, 0.0));
    Ok(&(&qubit + &osc) + &coupling)
}

/// Dispersive Hamiltonian `ω_m a†a + (g²/ω_a) σ_z ⊗ x₁²`.
pub fn build_h_eff(params: &SystemParams, space: FockSpace) -> Result<CMatrix> {
    validate(*params)?;
    let ops = OperatorSet::new(space);
    let free = ops.lift_oscillator(&ops.number).scale(C64::new(params.omega_m, 0.0));
    let x1sq = ops.x1.matmul(&ops.x1);
    let dispersive = ops.sigma_z.kron(&x1sq).scale(C64::new(params.dispersive_shift(), 0.0));
    Ok(&free + &dispersive)
}

/// Oscillator Hamiltonian with the qubit eigenvalue `sign` substituted for
/// `σ_z`: `ω_m a†a + sign·(g²/ω_a) x₁²`.
pub fn build_frozen_qubit_hamiltonian(params: &SystemParams, space: FockSpace, sign: f64) -> Result<CMatrix> {
    validate(*params)?;
    let ops = OperatorSet::new(space);
    let x1sq = ops.x1.matmul(&ops.x1);
    let mut h = ops.number.scale(C64::new(params.omega_m, 0.0));
    h.axpy_real(sign * params.dispersive_shift(), &x1sq);
    Ok(h)
}

/// Master-equation generator with precomputed sparse operators.
///
/// Stored as the non-Hermitian Hamiltonian `H − (i/2) Σ L†L` plus the jump
/// operators (each pre-scaled by the square root of its rate), which lets the
/// right-hand side of a Hermitian `ρ` be evaluated from one-sided products.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    dim: usize,
    hamiltonian: SparseMatrix,
    h_nonhermitian: SparseMatrix,
    jumps: Vec<SparseMatrix>,
    jump_number: Vec<SparseMatrix>,
}

impl Lindbladian {
    /// Generator for `hamiltonian` on either the joint space or the bare
    /// oscillator space, with the thermal bath acting on the oscillator.
    pub fn new(hamiltonian: &CMatrix, params: &SystemParams, space: FockSpace) -> Result<Self> {
        validate(*params)?;
        let dim = hamiltonian.rows();
        if !hamiltonian.is_square() {
            return Err(Error::InvalidArgument("hamiltonian must be square"));
        }
        let ops = OperatorSet::new(space);
        let lift = |op: &CMatrix| -> Result<CMatrix> {
            if dim == space.joint_dim() {
                Ok(ops.lift_oscillator(op))
            } else if dim == space.cutoff() {
                Ok(op.clone())
            } else {
                Err(Error::DimensionMismatch {
                    expected: space.joint_dim(),
                    got: dim,
                })
            }
        };
        let a = lift(&ops.annihilate)?;
        let ad = lift(&ops.create)?;
        let mut jumps_dense = Vec::new();
        let decay = params.gamma * (params.n_th + 1.0);
        let pump = params.gamma * params.n_th;
        if decay > 0.0 {
            jumps_dense.push(a.scale(C64::new(libm::sqrt(decay), 0.0)));
        }
        if pump > 0.0 {
            jumps_dense.push(ad.scale(C64::new(libm::sqrt(pump), 0.0)));
        }
        let mut h_nh = hamiltonian.clone();
        let mut jump_number = Vec::new();
        for l in &jumps_dense {
            let ldl = l.adjoint().matmul(l);
            h_nh.axpy(C64::new(0.0, -0.5), &ldl);
            jump_number.push(SparseMatrix::from_dense(&ldl));
        }
        Ok(Lindbladian {
            dim,
            hamiltonian: SparseMatrix::from_dense(hamiltonian),
            h_nonhermitian: SparseMatrix::from_dense(&h_nh),
            jumps: jumps_dense.iter().map(SparseMatrix::from_dense).collect(),
            jump_number,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// General right-hand side, valid for any (not necessarily Hermitian)
    /// operator: `−i[H, ρ] + Σ (LρL† − {L†L, ρ}/2)`.
    pub fn apply_general(&self, rho: &CMatrix) -> CMatrix {
        let rho_dag = rho.adjoint();
        // ρH = (Hρ†)† for Hermitian H
        let h_rho = self.hamiltonian.mul_dense(rho);
        let rho_h = self.hamiltonian.mul_dense(&rho_dag).adjoint();
        let mut out = (&h_rho - &rho_h).scale(C64::new(0.0, -1.0));
        for (l, ldl) in self.jumps.iter().zip(&self.jump_number) {
            // LρL† = L (L ρ†)†
            let l_rho_dag = l.mul_dense(&rho_dag);
            let sandwich = l.mul_dense(&l_rho_dag.adjoint());
            let left = ldl.mul_dense(rho);
            let right = ldl.mul_dense(&rho_dag).adjoint();
            out += &sandwich;
            out.axpy_real(-0.5, &left);
            out.axpy_real(-0.5, &right);
        }
        out
    }

    /// Right-hand side for Hermitian `ρ`, written into `out`.
    ///
    /// Uses `K = H_nh ρ`, so that `−iH_nh ρ + iρH_nh† = −i(K − K†)`, and
    /// `LρL† = L (Lρ)†`. `scratch` must be `dim × dim`.
    pub fn apply_hermitian(&self, rho: &CMatrix, out: &mut CMatrix, scratch: &mut CMatrix) {
        let n = self.dim;
        self.h_nonhermitian.mul_dense_into(rho, scratch);
        let k = scratch.as_slice();
        {
            let o = out.as_mut_slice();
            for i in 0..n {
                o[i * n + i] = C64::new(2.0 * k[i * n + i].im, 0.0);
                for j in (i + 1)..n {
                    // −i(K_ij − conj(K_ji))
                    let v = (k[i * n + j] - k[j * n + i].conj()) * C64::new(0.0, -1.0);
                    o[i * n + j] = v;
                    o[j * n + i] = v.conj();
                }
            }
        }
        for l in &self.jumps {
            l.mul_dense_into(rho, scratch);
            let lr = scratch.adjoint();
            l.mul_dense_acc(ONE, &lr, out);
        }
    }
}

/// `dρ/dt` for the master equation with Hamiltonian `h`.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &CMatrix, params: &SystemParams, space: FockSpace) -> Result<CMatrix> {
    if rho.dim() != h.rows() {
        return Err(Error::DimensionMismatch {
            expected: h.rows(),
            got: rho.dim(),
        });
    }
    let l = Lindbladian::new(h, params, space)?;
    Ok(l.apply_general(rho.matrix()))
}

/// Default master-equation step `(2π/ω_a)/100`.
pub fn default_step(params: &SystemParams) -> f64 {
    params.qubit_period() / 100.0
}

/// Fixed-step RK4 propagator owning its state and scratch buffers.
#[derive(Debug, Clone)]
pub struct Propagator {
    generator: Lindbladian,
    space: FockSpace,
    rho: CMatrix,
    time: f64,
    max_step: f64,
    k: [CMatrix; 4],
    stage: CMatrix,
    scratch: CMatrix,
}

impl Propagator {
    pub fn new(generator: Lindbladian, space: FockSpace, initial: DensityMatrix, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0) {
            return Err(Error::InvalidArgument("step must be positive"));
        }
        if initial.dim() != generator.dim() {
            return Err(Error::DimensionMismatch {
                expected: generator.dim(),
                got: initial.dim(),
            });
        }
        initial.check()?;
        let d = generator.dim();
        let zeros = || CMatrix::zeros(d, d);
        Ok(Propagator {
            generator,
            space,
            rho: initial.into_matrix(),
            time: 0.0,
            max_step,
            k: [zeros(), zeros(), zeros(), zeros()],
            stage: zeros(),
            scratch: zeros(),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn state(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(self.rho.clone())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    /// Replaces the state (e.g. after a measurement) keeping the clock.
    pub fn set_state(&mut self, rho: DensityMatrix) -> Result<()> {
        if rho.dim() != self.generator.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.generator.dim(),
                got: rho.dim(),
            });
        }
        self.rho = rho.into_matrix();
        Ok(())
    }

    fn step(&mut self, h: f64) {
        let g = &self.generator;
        let [k1, k2, k3, k4] = &mut self.k;
        g.apply_hermitian(&self.rho, k1, &mut self.scratch);

        self.stage.clone_from(&self.rho);
        self.stage.axpy_real(h / 2.0, k1);
        g.apply_hermitian(&self.stage, k2, &mut self.scratch);

        self.stage.clone_from(&self.rho);
        self.stage.axpy_real(h / 2.0, k2);
        g.apply_hermitian(&self.stage, k3, &mut self.scratch);

        self.stage.clone_from(&self.rho);
        self.stage.axpy_real(h, k3);
        g.apply_hermitian(&self.stage, k4, &mut self.scratch);

        let w = h / 6.0;
        let r = self.rho.as_mut_slice();
        let (s1, s2, s3, s4) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
        for idx in 0..r.len() {
            r[idx] += (s1[idx] + (s2[idx] + s3[idx]) * 2.0 + s4[idx]) * w;
        }
        self.rho.hermitize();
    }

    /// Advances by exactly `duration`, using the largest step not exceeding
    /// the configured maximum. Does not check the cutoff.
    pub fn advance(&mut self, duration: f64) {
        if duration <= 0.0 {
            return;
        }
        let n = substeps(duration, self.max_step);
        let h = duration / n as f64;
        let start = self.time;
        for _ in 0..n {
            self.step(h);
        }
        self.time = start + duration;
    }

    /// Fails with [`Error::CutoffExhausted`] if the top Fock level is populated.
    pub fn check_cutoff(&self) -> Result<()> {
        let population = top_level_population(&self.rho, self.space);
        if population > TOP_LEVEL_TOLERANCE {
            return Err(Error::CutoffExhausted {
                time: self.time,
                population,
            });
        }
        Ok(())
    }
}

/// Integrates the master equation with fixed-step RK4, sampling every
/// `cadence` (plus the final time). Aborts if the top Fock level population
/// exceeds [`TOP_LEVEL_TOLERANCE`] at a sample.
pub fn evolve(
    rho: &DensityMatrix,
    h: &CMatrix,
    params: &SystemParams,
    space: FockSpace,
    t_final: f64,
    dt: f64,
    cadence: f64,
) -> Result<Vec<(f64, DensityMatrix)>> {
    let mut out = Vec::new();
    evolve_with(rho, h, params, space, t_final, dt, cadence, |t, state| {
        out.push((t, state.clone()));
    })?;
    Ok(out)
}

/// Like [`evolve`], handing each sample to `observer` instead of storing it.
#[allow(clippy::too_many_arguments)]
pub fn evolve_with(
    rho: &DensityMatrix,
    h: &CMatrix,
    params: &SystemParams,
    space: FockSpace,
    t_final: f64,
    dt: f64,
    cadence: f64,
    mut observer: impl FnMut(f64, &DensityMatrix),
) -> Result<()> {
    if !(cadence > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidArgument(
            "cadence must be positive and t_final non-negative",
        ));
    }
    if rho.dim() != h.rows() {
        return Err(Error::DimensionMismatch {
            expected: h.rows(),
            got: rho.dim(),
        });
    }
    let generator = Lindbladian::new(h, params, space)?;
    let mut prop = Propagator::new(generator, space, rho.clone(), dt)?;
    let times = sample_times(t_final, cadence);
    prop.check_cutoff()?;
    observer(0.0, &prop.state());
    for w in times.windows(2) {
        prop.advance(w[1] - w[0]);
        prop.check_cutoff()?;
        observer(w[1], &prop.state());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FIG3: SystemParams = SystemParams::new(0.1, 8.0, 1.0, 0.1, 0.0);

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    #[test]
    fn cutoff_must_hold_two_levels() {
        assert!(FockSpace::new(1).is_err());
        assert_eq!(FockSpace::default_for(0.4).cutoff(), 40);
        assert_eq!(FockSpace::default_for(3.0).cutoff(), 60);
    }

    #[test]
    fn ladder_operator_entries() {
        let ops = OperatorSet::new(space(6));
        for n in 1..6 {
            assert_relative_eq!(ops.annihilate[(n - 1, n)].re, (n as f64).sqrt(), epsilon = 1e-15);
        }
        let nonzero = ops.annihilate.as_slice().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 5);
    }

    #[test]
    fn canonical_commutator_except_top_corner() {
        let n = 7;
        let ops = OperatorSet::new(space(n));
        let comm = ops.annihilate.commutator(&ops.create);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - C64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
        assert_relative_eq!(comm[(n - 1, n - 1)].re, -((n - 1) as f64), epsilon = 1e-12);
    }

    #[test]
    fn pauli_algebra() {
        let ops = OperatorSet::new(space(2));
        for s in [&ops.sigma_x, &ops.sigma_y, &ops.sigma_z] {
            assert!(s.matmul(s).max_abs_diff(&ops.qubit_identity) < 1e-15);
        }
        // σ+ = |e⟩⟨g|
        assert_eq!(ops.sigma_plus[(EXCITED, GROUND)], ONE);
        assert_eq!(ops.sigma_minus[(GROUND, EXCITED)], ONE);
        assert_eq!(ops.sigma_plus.max_abs(), 1.0);
    }

    #[test]
    fn thermal_state_examples() {
        let vac = thermal_state(0.0, space(5)).unwrap();
        assert_eq!(vac.matrix()[(0, 0)], ONE);
        assert_eq!(vac.trace(), 1.0);

        let t1 = thermal_state(1.0, space(60)).unwrap();
        for n in 0..10 {
            assert_relative_eq!(t1.matrix()[(n, n)].re, 0.5f64.powi(n as i32 + 1), epsilon = 1e-15);
        }

        match thermal_state(3.0, space(10)) {
            Err(Error::InsufficientCutoff { tail, suggested, .. }) => {
                assert_relative_eq!(tail, 0.75f64.powi(10), epsilon = 1e-15);
                assert_eq!(suggested, 49);
            }
            other => panic!("expected cutoff error, got {other:?}"),
        }
    }

    #[test]
    fn h1_matrix_elements() {
        let s = space(6);
        let h = build_h1(&FIG3, s).unwrap();
        assert!(h.hermiticity_defect() < 1e-15);
        assert_relative_eq!(h[(s.index(EXCITED, 0), s.index(GROUND, 1))].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            h[(s.index(EXCITED, 0), s.index(EXCITED, 0))].re,
            4.0 + 0.05,
            epsilon = 1e-15
        );
        let h0 = build_h1(&FIG3.with_g(0.0), s).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(h0[(s.index(EXCITED, i), s.index(GROUND, j))], ZERO);
            }
        }
    }

    #[test]
    fn h_eff_conserves_qubit_population() {
        let s = space(8);
        let ops = OperatorSet::new(s);
        let h = build_h_eff(&FIG3, s).unwrap();
        let sz = ops.lift_qubit(&ops.sigma_z);
        assert_eq!(h.commutator(&sz).max_abs(), 0.0);

        let block = CMatrix::from_fn(8, 8, |i, j| h[(s.index(EXCITED, i), s.index(EXCITED, j))]);
        let expected = build_frozen_qubit_hamiltonian(&FIG3, s, 1.0).unwrap();
        assert!(block.max_abs_diff(&expected) < 1e-15);

        let h0 = build_h_eff(&FIG3.with_g(0.0), s).unwrap();
        assert!(h0.max_abs_diff(&ops.lift_oscillator(&ops.number).scale(C64::new(0.1, 0.0))) < 1e-15);
    }

    #[test]
    fn vacuum_is_dark_for_decay() {
        let s = space(5);
        let p = FIG3.with_g(0.0);
        let vac = thermal_state(0.0, s).unwrap();
        let rhs = lindblad_rhs(&vac, &CMatrix::zeros(5, 5), &p, s).unwrap();
        assert_eq!(rhs.max_abs(), 0.0);
    }

    #[test]
    fn one_phonon_decay() {
        let s = space(5);
        let p = FIG3.with_g(0.0);
        let one = DensityMatrix::fock(s, 1).unwrap();
        let rhs = lindblad_rhs(&one, &CMatrix::zeros(5, 5), &p, s).unwrap();
        let mut expected = CMatrix::zeros(5, 5);
        expected[(0, 0)] = C64::new(0.1, 0.0);
        expected[(1, 1)] = C64::new(-0.1, 0.0);
        assert!(rhs.max_abs_diff(&expected) < 1e-15);
    }

    fn random_hermitian_state(dim: usize, seed: u64) -> DensityMatrix {
        // xorshift keeps the core crate free of an RNG dependency
        let mut x = seed.max(1);
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x % 10_000) as f64 / 10_000.0 - 0.5
        };
        let b = CMatrix::from_fn(dim, dim, |_, _| C64::new(next(), next()));
        let m = b.matmul(&b.adjoint());
        let tr = m.trace().re;
        DensityMatrix::new(m.scale(C64::new(1.0 / tr, 0.0))).unwrap()
    }

    #[test]
    fn rhs_is_traceless_and_hermitian_for_random_states() {
        let s = space(6);
        let p = FIG3.with_n_th(0.7);
        let h = build_h1(&p, s).unwrap();
        let l = Lindbladian::new(&h, &p, s).unwrap();
        for seed in 1..6 {
            let rho = random_hermitian_state(12, seed * 7919);
            let general = l.apply_general(rho.matrix());
            assert!(general.trace().norm() < 1e-12);
            assert!(general.hermiticity_defect() < 1e-12);
            let mut fast = CMatrix::zeros(12, 12);
            let mut scratch = CMatrix::zeros(12, 12);
            l.apply_hermitian(rho.matrix(), &mut fast, &mut scratch);
            assert!(fast.max_abs_diff(&general) < 1e-12);
        }
    }

    #[test]
    fn rhs_rejects_dimension_mismatch() {
        let s = space(4);
        let rho = thermal_state(0.0, s).unwrap();
        let h = build_h1(&FIG3, s).unwrap();
        assert!(matches!(
            lindblad_rhs(&rho, &h, &FIG3, s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn uncoupled_thermal_excited_state_is_stationary() {
        let s = space(30);
        let p = FIG3.with_g(0.0).with_n_th(0.5);
        let rho0 = DensityMatrix::with_qubit(EXCITED, &thermal_state(0.5, s).unwrap());
        let h = build_h1(&p, s).unwrap();
        let traj = evolve(&rho0, &h, &p, s, 5.0, default_step(&p), 1.0).unwrap();
        assert_eq!(traj.len(), 6);
        for (_, rho) in &traj {
            assert!(rho.matrix().max_abs_diff(rho0.matrix()) < 1e-10);
        }
    }

    #[test]
    fn evolution_preserves_density_matrix_invariants() {
        let s = space(40);
        let p = FIG3.with_n_th(0.2);
        let rho0 = DensityMatrix::with_qubit(EXCITED, &thermal_state(0.2, s).unwrap());
        let h = build_h1(&p, s).unwrap();
        let traj = evolve(&rho0, &h, &p, s, 5.0, default_step(&p), 0.5).unwrap();
        for (_, rho) in &traj {
            rho.check().unwrap();
            assert!((rho.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cutoff_exhaustion_aborts() {
        // a thermal bath at n_th = 2 heats a vacuum oscillator past an 8-level cutoff
        let s = space(8);
        let p = FIG3.with_g(0.0).with_n_th(2.0).with_gamma(1.0);
        let rho0 = thermal_state(0.0, s).unwrap();
        let h = build_frozen_qubit_hamiltonian(&p, s, 1.0).unwrap();
        let err = evolve(&rho0, &h, &p, s, 10.0, 0.01, 1.0).unwrap_err();
        assert!(matches!(err, Error::CutoffExhausted { .. }));
    }
}
