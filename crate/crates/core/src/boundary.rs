//! Boundary control on the interval with Dirichlet data `u = (u(0), u(1))`.
//!
//! The Dirichlet map `D_λ` lifts boundary values to `ker(λ - Δ)`, the control
//! operator is `B = (λ - A_{-1}) D_λ`, and the feedback law `Gz = Kz` with
//! bounded `K` turns the boundary problem into `ż = (A + BK)z + w + f` at the
//! truncated level.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::kernels::MemoryKernel;
use crate::quadrature::{self, adaptive_simpson, QuadError, QuadOptions};
use crate::spectral::{BoundaryKind, SpectralError, SpectralOperator, StateVector};
use crate::volterra::{Forcing, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("boundary control needs the Dirichlet basis, got {0}")]
    NotDirichlet(BoundaryKind),
    #[error("λ = {0} is not an admissible resolvent point (need λ >= 0)")]
    BadResolventPoint(f64),
    #[error("boundary path must satisfy u(0) = u'(0) = 0")]
    PathNotAnchored,
    #[error("evaluation time must be positive, got {0}")]
    BadTime(f64),
    #[error("kernel {0} is not a pure exponential")]
    UnsupportedKernel(MemoryKernel),
    #[error("fractional power α = {0} outside (0, 1/2]")]
    BadAlpha(f64),
    #[error("feedback representers have {got} modes, operator has {expected}")]
    ModeMismatch { expected: usize, got: usize },
    #[error("time grid needs a positive step and at least 2 steps")]
    BadGrid,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Boundary values `(u(0), u(1))`.
pub type BoundaryValue = [f64; 2];

fn check_dirichlet(op: &SpectralOperator) -> Result<(), BoundaryError> {
    match op.kind() {
        BoundaryKind::Dirichlet => Ok(()),
        k => Err(BoundaryError::NotDirichlet(k)),
    }
}

fn check_lambda(lambda: f64) -> Result<(), BoundaryError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(BoundaryError::BadResolventPoint(lambda))
    }
}

/// `√2 kπ (u₀ - (-1)^k u₁)` for `k = 1..=n`: the boundary term left by
/// integrating `v''` against `√2 sin kπx` twice.
fn boundary_flux(n: usize, u: BoundaryValue) -> Vec<f64> {
    (1..=n).map(|k| boundary_flux_mode(k, u)).collect()
}

/// `sinh(a)/sinh(b)` for `0 <= a <= b`, `b > 0`, without overflow.
fn sinh_ratio(a: f64, b: f64) -> f64 {
    (a - b).exp() * (-(-2.0 * a).exp_m1()) / (-(-2.0 * b).exp_m1())
}

/// `D_λ u` as a function and as sine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMap {
    pub lambda: f64,
    pub boundary: BoundaryValue,
    pub coefficients: StateVector,
}

impl DirichletMap {
    /// The solution of `λv - v'' = 0`, `v(0) = u₀`, `v(1) = u₁`.
    pub fn value(&self, x: f64) -> f64 {
        let [u0, u1] = self.boundary;
        if self.lambda == 0.0 {
            return u0 + (u1 - u0) * x;
        }
        let mu = self.lambda.sqrt();
        u0 * sinh_ratio(mu * (1.0 - x), mu) + u1 * sinh_ratio(mu * x, mu)
    }

    /// Boundary trace `G D_λ u`.
    pub fn trace(&self) -> BoundaryValue {
        [self.value(0.0), self.value(1.0)]
    }
}

pub fn dirichlet_map(op: &SpectralOperator, lambda: f64, u: BoundaryValue) -> Result<DirichletMap, BoundaryError> {
    check_dirichlet(op)?;
    check_lambda(lambda)?;
    let flux = boundary_flux(op.modes(), u);
    let coefficients = op
        .eigenvalues()
        .iter()
        .zip(flux)
        .map(|(l, b)| b / (lambda + l))
        .collect::<Vec<_>>();
    Ok(DirichletMap {
        lambda,
        boundary: u,
        coefficients: StateVector::new(coefficients),
    })
}

/// `B u = (λ - A_{-1}) D_λ u` in extrapolated coordinates.
pub fn control_apply(op: &SpectralOperator, lambda: f64, u: BoundaryValue) -> Result<StateVector, BoundaryError> {
    let d = dirichlet_map(op, lambda, u)?;
    Ok(StateVector::new(
        op.eigenvalues()
            .iter()
            .zip(d.coefficients.as_slice())
            .map(|(l, c)| (lambda + l) * c)
            .collect(),
    ))
}

/// `(N, ‖B_N u‖_X, ‖B_N u‖_{-1})` for each truncation level; the first grows
/// without bound while the second converges.
pub fn control_norm_scan(sizes: &[usize], u: BoundaryValue, mu: f64) -> Result<Vec<(usize, f64, f64)>, BoundaryError> {
    sizes
        .iter()
        .map(|&n| {
            let op = SpectralOperator::dirichlet(n)?;
            let b = control_apply(&op, 0.0, u)?;
            Ok((n, b.norm(), op.extrapolation_norm(mu, &b)?))
        })
        .collect()
}

/// `u(t) = Σ_j c_j t^j` componentwise, with `c_0 = c_1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPath {
    coeffs: [Vec<f64>; 2],
}

impl PolynomialPath {
    pub fn new(left: Vec<f64>, right: Vec<f64>) -> Result<Self, BoundaryError> {
        for c in [&left, &right] {
            if c.iter().take(2).any(|&v| v != 0.0) {
                return Err(BoundaryError::PathNotAnchored);
            }
        }
        Ok(Self { coeffs: [left, right] })
    }

    pub fn zero() -> Self {
        Self {
            coeffs: [vec![], vec![]],
        }
    }

    /// Random degree 2..=5 path with Gaussian coefficients.
    pub fn random(rng: &mut impl rand::Rng) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let mut side = || {
            let mut c = vec![0.0, 0.0];
            c.extend((0..4).map(|_| -> f64 { StandardNormal.sample(&mut *rng) }));
            c
        };
        let left = side();
        let right = side();
        Self { coeffs: [left, right] }
    }

    pub fn value(&self, t: f64) -> BoundaryValue {
        self.coeffs
            .clone()
            .map(|c| c.iter().rev().fold(0.0, |acc, v| acc * t + v))
    }

    pub fn derivative(&self, t: f64) -> BoundaryValue {
        self.coeffs.clone().map(|c| {
            c.iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (j, v)| acc * t + j as f64 * v)
        })
    }

    /// `‖u‖_{L²(0,t; ℝ²)}`.
    pub fn l2_norm(&self, t: f64) -> Result<f64, BoundaryError> {
        let r = quadrature::integrate(
            |s| {
                let [a, b] = self.value(s);
                a * a + b * b
            },
            0.0,
            t,
            QuadOptions::with_rel_tol(1e-12),
        )?;
        Ok(r.value.sqrt())
    }
}

fn check_time(t: f64) -> Result<(), BoundaryError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(BoundaryError::BadTime(t))
    }
}

/// `Φ_t u = D_0 u(t) - ∫_0^t T(t-s) D_0 u̇(s) ds`, each mode by adaptive Simpson.
pub fn input_map(op: &SpectralOperator, u: &PolynomialPath, t: f64) -> Result<StateVector, BoundaryError> {
    check_dirichlet(op)?;
    check_time(t)?;
    let n = op.modes();
    let lam = op.eigenvalues();
    let d_end = dirichlet_map(op, 0.0, u.value(t))?.coefficients;
    let mut out = Vec::with_capacity(n);
    for (k, &l) in lam.iter().enumerate() {
        let integrand = |s: f64| {
            let du = boundary_flux_mode(k + 1, u.derivative(s)) / l;
            (-l * (t - s)).exp() * du
        };
        let conv = adaptive_simpson(integrand, 0.0, t, 1e-13, 50)?;
        out.push(d_end[k] - conv);
    }
    Ok(StateVector::new(out))
}

/// `∫_0^t T_{-1}(t-s) B u(s) ds` coefficientwise, by adaptive Gauss-Legendre.
pub fn input_map_convolution(op: &SpectralOperator, u: &PolynomialPath, t: f64) -> Result<StateVector, BoundaryError> {
    check_dirichlet(op)?;
    check_time(t)?;
    let opts = QuadOptions::with_rel_tol(1e-12);
    let out = op
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let g = |s: f64| (-l * (t - s)).exp() * boundary_flux_mode(k + 1, u.value(s));
            // the integrand is concentrated within a few 1/λ of s = t
            let split = (t - 30.0 / l).max(0.0);
            let mut v = quadrature::integrate(g, split, t, opts)?.value;
            if split > 0.0 {
                v += quadrature::integrate(g, 0.0, split, opts)?.value;
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>, QuadError>>()?;
    Ok(StateVector::new(out))
}

fn boundary_flux_mode(k: usize, u: BoundaryValue) -> f64 {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    2f64.sqrt() * k as f64 * std::f64::consts::PI * (u[0] - sign * u[1])
}

/// Feedback `Kz = (⟨z, k₀⟩, ⟨z, k₁⟩)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub representers: [StateVector; 2],
}

impl Feedback {
    pub fn zero(n: usize) -> Self {
        Self {
            representers: [StateVector::zeros(n), StateVector::zeros(n)],
        }
    }

    /// `k₀ = κ e₁`, `k₁ = κ e₂`, so `‖K‖ = κ`.
    pub fn lowest_modes(n: usize, knorm: f64) -> Self {
        let e = |k: usize| {
            if k < n {
                StateVector::basis(n, k).scaled(knorm)
            } else {
                StateVector::zeros(n)
            }
        };
        Self {
            representers: [e(0), e(1)],
        }
    }

    pub fn apply(&self, z: &StateVector) -> BoundaryValue {
        [self.representers[0].dot(z), self.representers[1].dot(z)]
    }

    /// Operator norm `X → ℝ²`.
    pub fn norm(&self) -> f64 {
        let [a, b] = &self.representers;
        let (aa, bb, ab) = (a.dot(a), b.dot(b), a.dot(b));
        // largest eigenvalue of the 2×2 Gram matrix
        let tr = aa + bb;
        let det = aa * bb - ab * ab;
        (0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySystem {
    pub op: SpectralOperator,
    pub alpha: f64,
    pub kernel: MemoryKernel,
    pub feedback: Feedback,
    pub forcing: Forcing,
}

impl BoundarySystem {
    pub fn new(
        op: SpectralOperator,
        alpha: f64,
        kernel: MemoryKernel,
        feedback: Feedback,
        forcing: Forcing,
    ) -> Result<Self, BoundaryError> {
        check_dirichlet(&op)?;
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(BoundaryError::BadAlpha(alpha));
        }
        if !kernel.is_exponential() {
            return Err(BoundaryError::UnsupportedKernel(kernel));
        }
        let n = op.modes();
        for r in feedback
            .representers
            .iter()
            .map(StateVector::len)
            .chain([forcing.modes()])
        {
            if r != n {
                return Err(BoundaryError::ModeMismatch { expected: n, got: r });
            }
        }
        if !(forcing.dt() > 0.0) || forcing.steps() < 2 {
            return Err(BoundaryError::BadGrid);
        }
        Ok(Self {
            op,
            alpha,
            kernel,
            feedback,
            forcing,
        })
    }

    /// Truncated `A + BK`.
    pub fn perturbed_generator(&self) -> DMatrix<f64> {
        let n = self.op.modes();
        let b = [boundary_flux(n, [1.0, 0.0]), boundary_flux(n, [0.0, 1.0])];
        let k = &self.feedback.representers;
        DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { -self.op.eigenvalues()[i] } else { 0.0 };
            diag + b[0][i] * k[0][j] + b[1][i] * k[1][j]
        })
    }
}

/// Largest real part of the spectrum of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySolution {
    /// `az` holds `A_m z = ż - w - f`.
    pub trajectory: Trajectory,
    /// `Gz(t_j) = Kz(t_j)`.
    pub boundary_values: Vec<BoundaryValue>,
    pub spectral_abscissa: f64,
    /// `spectral_abscissa < 0`.
    pub stable: bool,
}

/// Steps `ż = (A + BK)z + w + f`, `ẇ = βλ^α z - γw` with the exact dense
/// propagator and midpoint forcing.
pub fn solve_boundary_volterra(sys: &BoundarySystem) -> Result<BoundarySolution, BoundaryError> {
    let n = sys.op.modes();
    let h = sys.forcing.dt();
    let steps = sys.forcing.steps();
    let m = sys.perturbed_generator();
    let abscissa = spectral_abscissa(&m);
    let stable = abscissa < 0.0;
    if !stable {
        log::warn!("perturbed generator has spectral abscissa {abscissa:.4e} at N = {n}");
    }
    let (beta, gamma) = (sys.kernel.beta(), sys.kernel.gamma());
    let mut block = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = m[(i, j)] * h;
        }
        let l = sys.op.eigenvalues()[i];
        block[(i, n + i)] = h;
        block[(n + i, i)] = beta * l.powf(sys.alpha) * h;
        block[(n + i, n + i)] = -gamma * h;
        block[(i, 2 * n + i)] = h;
    }
    let e = block.exp();
    let prop = e.view((0, 0), (2 * n, 2 * n)).into_owned();
    let inject = e.view((0, 2 * n), (2 * n, n)).into_owned();

    let mut x = DVector::zeros(2 * n);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x.clone());
    for j in 0..steps {
        let f = DVector::from_column_slice(sys.forcing.at_mid(j).as_slice());
        x = &prop * &x + &inject * f;
        states.push(x.clone());
    }

    let mut z = Vec::with_capacity(steps + 1);
    let mut w = Vec::with_capacity(steps + 1);
    let mut zdot = Vec::with_capacity(steps + 1);
    let mut az = Vec::with_capacity(steps + 1);
    let mut boundary_values = Vec::with_capacity(steps + 1);
    for (s, f) in states.iter().zip(sys.forcing.grid()) {
        let zj = s.rows(0, n).into_owned();
        let wj = StateVector::new(s.rows(n, n).iter().copied().collect());
        let mz = StateVector::new((&m * &zj).iter().copied().collect());
        let zj = StateVector::new(zj.iter().copied().collect());
        let d = &(&mz + &wj) + f;
        // A_m z recovered from the equation
        let amz = &(&d - &wj) - f;
        boundary_values.push(sys.feedback.apply(&zj));
        z.push(zj);
        w.push(wj);
        zdot.push(d);
        az.push(amz);
    }
    Ok(BoundarySolution {
        trajectory: Trajectory { dt: h, z, w, zdot, az },
        boundary_values,
        spectral_abscissa: abscissa,
        stable,
    })
}
