//! Solvers for `ż = Az + ∫_0^t a(t-s)(-A)^α z(s) ds + f(t)`, `z(0) = 0`.
//!
//! Two independent routes are provided. [`solve_augmented`] uses the history
//! reformulation: for `a(t) = βe^{-γt}` the memory term `w(t)` obeys
//! `ẇ = β(-A)^α z - γw`, and each mode becomes a 2×2 linear system stepped
//! with its exact propagator. [`solve_cq`] discretizes the convolution itself
//! with product-trapezoidal weights and exponential time differencing, and
//! works for every kernel in the family.

mod augmented;
mod cq;
mod forcing;

pub use augmented::solve_augmented;
pub use cq::solve_cq;
pub use forcing::{unit_function_coefficients, Forcing};

use thiserror::Error;

use crate::kernels::MemoryKernel;
use crate::quadrature::{cumulative_simpson, QuadError};
use crate::spectral::{SpectralError, SpectralOperator, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolterraError {
    #[error("fractional power α = {0} outside (0, 1/2]")]
    BadAlpha(f64),
    #[error("forcing has {got} modes, operator has {expected}")]
    ModeMismatch { expected: usize, got: usize },
    #[error("forcing is not finite")]
    NonFiniteForcing,
    #[error("time grid needs a positive step and at least 2 steps (dt = {dt}, steps = {steps})")]
    BadGrid { dt: f64, steps: usize },
    #[error("kernel {0} is not a pure exponential; use the convolution-quadrature solver")]
    UnsupportedKernel(MemoryKernel),
    #[error("step too large for mode {mode}: implicit memory factor {factor} (reduce dt)")]
    StepTooLarge { mode: usize, factor: f64 },
    #[error("trajectory does not match the problem grid")]
    GridMismatch,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraProblem {
    op: SpectralOperator,
    alpha: f64,
    kernel: MemoryKernel,
    forcing: Forcing,
}

impl VolterraProblem {
    pub fn new(
        op: SpectralOperator,
        alpha: f64,
        kernel: MemoryKernel,
        forcing: Forcing,
    ) -> Result<Self, VolterraError> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(VolterraError::BadAlpha(alpha));
        }
        if forcing.modes() != op.modes() {
            return Err(VolterraError::ModeMismatch {
                expected: op.modes(),
                got: forcing.modes(),
            });
        }
        if !(forcing.dt() > 0.0 && forcing.dt().is_finite()) || forcing.steps() < 2 {
            return Err(VolterraError::BadGrid {
                dt: forcing.dt(),
                steps: forcing.steps(),
            });
        }
        if !forcing.is_finite() {
            return Err(VolterraError::NonFiniteForcing);
        }
        Ok(Self {
            op,
            alpha,
            kernel,
            forcing,
        })
    }

    pub fn op(&self) -> &SpectralOperator {
        &self.op
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }
    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }
    pub fn dt(&self) -> f64 {
        self.forcing.dt()
    }
    pub fn steps(&self) -> usize {
        self.forcing.steps()
    }
    pub fn horizon(&self) -> f64 {
        self.forcing.horizon()
    }

    pub fn with_forcing(&self, forcing: Forcing) -> Result<Self, VolterraError> {
        Self::new(self.op.clone(), self.alpha, self.kernel, forcing)
    }

    /// `λ_k^α` for every mode.
    pub(crate) fn fractional_weights(&self) -> Vec<f64> {
        self.op.eigenvalues().iter().map(|l| l.powf(self.alpha)).collect()
    }
}

/// Time-sampled solution on the uniform grid `t_j = jΔt`.
///
/// `zdot` is reported as `Az + w + f` rather than by differencing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub z: Vec<StateVector>,
    /// Memory trace `w_j = ∫_0^{t_j} a(t_j - s)(-A)^α z(s) ds`.
    pub w: Vec<StateVector>,
    pub zdot: Vec<StateVector>,
    pub az: Vec<StateVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    /// Builds the trajectory from mode-major `z` and `w` histories.
    pub(crate) fn from_modes(
        op: &SpectralOperator,
        forcing: &Forcing,
        z_modes: &[Vec<f64>],
        w_modes: &[Vec<f64>],
    ) -> Self {
        let n = op.modes();
        let len = forcing.steps() + 1;
        let lam = op.eigenvalues();
        let mut z = Vec::with_capacity(len);
        let mut w = Vec::with_capacity(len);
        let mut zdot = Vec::with_capacity(len);
        let mut az = Vec::with_capacity(len);
        for (j, f) in forcing.grid().enumerate() {
            let zj: Vec<f64> = (0..n).map(|k| z_modes[k][j]).collect();
            let wj: Vec<f64> = (0..n).map(|k| w_modes[k][j]).collect();
            let azj: Vec<f64> = (0..n).map(|k| -lam[k] * zj[k]).collect();
            let dj: Vec<f64> = (0..n).map(|k| azj[k] + wj[k] + f[k]).collect();
            z.push(StateVector::new(zj));
            w.push(StateVector::new(wj));
            zdot.push(StateVector::new(dj));
            az.push(StateVector::new(azj));
        }
        debug_assert_eq!(z.len(), len);
        Self {
            dt: forcing.dt(),
            z,
            w,
            zdot,
            az,
        }
    }

    /// `max_j ‖z_j - other.z_j‖_X`.
    pub fn max_distance(&self, other: &Trajectory) -> f64 {
        self.z
            .iter()
            .zip(&other.z)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Pointwise residual `‖z_j - ∫_0^{t_j} (Az + w + f)‖_X` of the integrated
/// equation, with `Az` recomputed from `z` and the integral taken by
/// fourth-order cumulative Simpson.
pub fn residual_profile(prob: &VolterraProblem, traj: &Trajectory) -> Result<Vec<f64>, VolterraError> {
    let len = prob.steps() + 1;
    if traj.len() != len || traj.w.len() != len || (traj.dt - prob.dt()).abs() > 1e-15 * prob.dt() {
        return Err(VolterraError::GridMismatch);
    }
    let lam = prob.op().eigenvalues();
    let mut sq = vec![0.0; len];
    let mut integrand = vec![0.0; len];
    for (k, &l) in lam.iter().enumerate() {
        for (j, f) in prob.forcing().grid().enumerate() {
            integrand[j] = -l * traj.z[j][k] + traj.w[j][k] + f[k];
        }
        let cum = cumulative_simpson(&integrand, prob.dt())?;
        for j in 0..len {
            let r = traj.z[j][k] - cum[j];
            sq[j] += r * r;
        }
    }
    Ok(sq.into_iter().map(f64::sqrt).collect())
}

/// `max_j` of [`residual_profile`].
pub fn residual(prob: &VolterraProblem, traj: &Trajectory) -> Result<f64, VolterraError> {
    Ok(residual_profile(prob, traj)?.into_iter().fold(0.0, f64::max))
}

/// Dispatches to the augmented solver for pure exponentials and to the
/// convolution-quadrature solver otherwise.
pub fn solve(prob: &VolterraProblem) -> Result<Trajectory, VolterraError> {
    if prob.kernel().is_exponential() {
        solve_augmented(prob)
    } else {
        solve_cq(prob)
    }
}
