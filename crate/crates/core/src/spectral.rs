//! Galerkin-truncated eigenbasis model of a negative self-adjoint generator on
//! `L²(0,1)`.
//!
//! `A` is the Dirichlet or Neumann Laplacian (shifted in the Neumann case so
//! that `0 ∈ ρ(A)`). All operators act diagonally on the coefficient vector
//! of a [`StateVector`], so semigroup, resolvent and fractional powers are
//! exact at the chosen truncation level.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Index, Mul, Sub};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("mode count must be positive")]
    NoModes,
    #[error("negative time t = {0}")]
    NegativeTime(f64),
    #[error("λ = {lambda} hits the spectrum (eigenvalue {eigenvalue} of -A)")]
    SpectralPoint { lambda: f64, eigenvalue: f64 },
    #[error("fractional exponent {0} outside (0, 1]")]
    BadExponent(f64),
    #[error("state has {got} coefficients, operator has {expected} modes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Neumann shift must be positive, got {0}")]
    BadShift(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryKind::Dirichlet => write!(f, "dirichlet"),
            BoundaryKind::Neumann => write!(f, "neumann"),
        }
    }
}

impl FromStr for BoundaryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "neumann" => Ok(BoundaryKind::Neumann),
            other => Err(format!("unknown boundary kind '{other}' (dirichlet|neumann)")),
        }
    }
}

/// Coefficients of an `X`-valued state in the eigenbasis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self(coefficients)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// `k`-th unit vector, zero-based.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `‖x‖_X` by Parseval.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> StateVector {
        StateVector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &StateVector {
    type Output = StateVector;
    fn mul(self, s: f64) -> StateVector {
        self.scaled(s)
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Diagonal model of `A`; `eigenvalues` are those of `-A`, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOperator {
    kind: BoundaryKind,
    eigenvalues: Vec<f64>,
    shift: f64,
}

pub const DEFAULT_NEUMANN_SHIFT: f64 = 1.0;

impl SpectralOperator {
    /// `λ_k = (kπ)²`, `k = 1..=n`.
    pub fn dirichlet(n: usize) -> Result<Self, SpectralError> {
        if n == 0 {
            return Err(SpectralError::NoModes);
        }
        let eigenvalues = (1..=n).map(|k| (k as f64 * PI).powi(2)).collect();
        Ok(Self {
            kind: BoundaryKind::Dirichlet,
            eigenvalues,
            shift: 0.0,
        })
    }

    /// `λ_k = ((k-1)π)² + shift`.
    pub fn neumann(n: usize, shift: f64) -> Result<Self, SpectralError> {
        if n == 0 {
            return Err(SpectralError::NoModes);
        }
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(SpectralError::BadShift(shift));
        }
        let eigenvalues = (0..n).map(|k| (k as f64 * PI).powi(2) + shift).collect();
        Ok(Self {
            kind: BoundaryKind::Neumann,
            eigenvalues,
            shift,
        })
    }

    pub fn new(kind: BoundaryKind, n: usize) -> Result<Self, SpectralError> {
        match kind {
            BoundaryKind::Dirichlet => Self::dirichlet(n),
            BoundaryKind::Neumann => Self::neumann(n, DEFAULT_NEUMANN_SHIFT),
        }
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Growth bound `ω₀(A) = -λ₁`.
    pub fn growth_bound(&self) -> f64 {
        -self.eigenvalues[0]
    }

    /// Value of the `k`-th (zero-based) basis function at `x ∈ [0,1]`.
    pub fn basis_function(&self, k: usize, x: f64) -> f64 {
        match self.kind {
            BoundaryKind::Dirichlet => 2f64.sqrt() * ((k + 1) as f64 * PI * x).sin(),
            BoundaryKind::Neumann if k == 0 => 1.0,
            BoundaryKind::Neumann => 2f64.sqrt() * (k as f64 * PI * x).cos(),
        }
    }

    fn check_dim(&self, x: &StateVector) -> Result<(), SpectralError> {
        if x.len() != self.modes() {
            return Err(SpectralError::DimensionMismatch {
                expected: self.modes(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn map(&self, x: &StateVector, f: impl Fn(f64, f64) -> f64) -> StateVector {
        StateVector(
            self.eigenvalues
                .iter()
                .zip(x.as_slice())
                .map(|(&l, &c)| f(l, c))
                .collect(),
        )
    }

    /// `T(t)x`, coefficients `e^{-λ_k t} x_k`.
    pub fn semigroup_apply(&self, t: f64, x: &StateVector) -> Result<StateVector, SpectralError> {
        if t < 0.0 || t.is_nan() {
            return Err(SpectralError::NegativeTime(t));
        }
        self.check_dim(x)?;
        Ok(self.map(x, |l, c| (-l * t).exp() * c))
    }

    /// `R(λ, A)x = (λ - A)^{-1} x`.
    pub fn resolvent_apply(&self, lambda: f64, x: &StateVector) -> Result<StateVector, SpectralError> {
        self.check_dim(x)?;
        for &l in &self.eigenvalues {
            let d = lambda + l;
            if d.abs() <= 1e-14 * l.max(1.0) {
                return Err(SpectralError::SpectralPoint { lambda, eigenvalue: l });
            }
        }
        Ok(self.map(x, |l, c| c / (lambda + l)))
    }

    /// `(-A)^α x` for `α ∈ (0, 1]`.
    pub fn fractional_power_apply(&self, alpha: f64, x: &StateVector) -> Result<StateVector, SpectralError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(SpectralError::BadExponent(alpha));
        }
        self.check_dim(x)?;
        Ok(self.map(x, |l, c| l.powf(alpha) * c))
    }

    /// `Ax`, coefficients `-λ_k x_k`.
    pub fn generator_apply(&self, x: &StateVector) -> Result<StateVector, SpectralError> {
        self.check_dim(x)?;
        Ok(self.map(x, |l, c| -l * c))
    }

    /// `(‖x‖² + ‖Ax‖²)^{1/2}`.
    pub fn graph_norm(&self, x: &StateVector) -> Result<f64, SpectralError> {
        self.check_dim(x)?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(x.as_slice())
            .map(|(l, c)| c * c * (1.0 + l * l))
            .sum::<f64>()
            .sqrt())
    }

    /// `‖x‖_{-1} = ‖R(μ, A)x‖`.
    pub fn extrapolation_norm(&self, mu: f64, x: &StateVector) -> Result<f64, SpectralError> {
        Ok(self.resolvent_apply(mu, x)?.norm())
    }

    /// Operator norm of `R(μ, A)` for `μ > -λ₁`.
    pub fn resolvent_norm(&self, mu: f64) -> f64 {
        1.0 / (mu + self.eigenvalues[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dirichlet_spectrum() {
        let op = SpectralOperator::dirichlet(4).unwrap();
        assert_relative_eq!(op.eigenvalues()[0], PI * PI);
        assert_relative_eq!(op.eigenvalues()[3], 16.0 * PI * PI);
        assert_eq!(op.shift(), 0.0);
        assert_relative_eq!(op.growth_bound(), -PI * PI);
    }

    #[test]
    fn neumann_spectrum_is_shifted() {
        let op = SpectralOperator::new(BoundaryKind::Neumann, 3).unwrap();
        assert_eq!(op.eigenvalues()[0], 1.0);
        assert_relative_eq!(op.eigenvalues()[2], 4.0 * PI * PI + 1.0);
        assert!(SpectralOperator::neumann(3, 0.0).is_err());
        assert!(SpectralOperator::dirichlet(0).is_err());
    }

    #[test]
    fn semigroup_identity_and_decay() {
        let op = SpectralOperator::dirichlet(1).unwrap();
        let x = StateVector::new(vec![1.0]);
        assert_eq!(op.semigroup_apply(0.0, &x).unwrap(), x);
        let y = op.semigroup_apply(1.0, &x).unwrap();
        // e^{-π²} = 5.1723e-5
        assert_relative_eq!(y[0], 5.172318620381e-5, max_relative = 1e-11);
        assert!(op.semigroup_apply(-1e-3, &x).is_err());
        let mut prev = 1.0;
        for t in [0.1, 1.0, 10.0] {
            let v = op.semigroup_apply(t, &x).unwrap()[0];
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn resolvent_examples() {
        let op = SpectralOperator::dirichlet(5).unwrap();
        let e1 = StateVector::basis(5, 0);
        let r = op.resolvent_apply(0.0, &e1).unwrap();
        assert_relative_eq!(r[0], 1.0 / (PI * PI));
        assert!(matches!(
            op.resolvent_apply(-PI * PI, &e1),
            Err(SpectralError::SpectralPoint { .. })
        ));
    }

    #[test]
    fn fractional_power_examples() {
        let op = SpectralOperator::dirichlet(3).unwrap();
        let e1 = StateVector::basis(3, 0);
        assert_relative_eq!(op.fractional_power_apply(0.5, &e1).unwrap()[0], PI, epsilon = 1e-14);
        let x = StateVector::new(vec![1.0, -2.0, 0.5]);
        let one = op.fractional_power_apply(1.0, &x).unwrap();
        let gen = op.generator_apply(&x).unwrap();
        assert_eq!(one, gen.scaled(-1.0));
        for bad in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(op.fractional_power_apply(bad, &x).is_err());
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let op = SpectralOperator::dirichlet(3).unwrap();
        assert!(matches!(
            op.semigroup_apply(1.0, &StateVector::zeros(2)),
            Err(SpectralError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn norms() {
        let op = SpectralOperator::dirichlet(2).unwrap();
        let x = StateVector::new(vec![3.0, 4.0]);
        assert_eq!(x.norm(), 5.0);
        let g = op.graph_norm(&x).unwrap();
        let l = op.eigenvalues();
        assert_relative_eq!(g * g, 25.0 + 9.0 * l[0] * l[0] + 16.0 * l[1] * l[1]);
        let mu = 2.0;
        let e = op.extrapolation_norm(mu, &x).unwrap();
        assert!(e <= op.resolvent_norm(mu) * x.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn basis_functions() {
        let d = SpectralOperator::dirichlet(2).unwrap();
        assert_relative_eq!(d.basis_function(0, 0.5), 2f64.sqrt());
        assert!(d.basis_function(1, 1.0).abs() < 1e-12);
        let n = SpectralOperator::neumann(2, 1.0).unwrap();
        assert_eq!(n.basis_function(0, 0.3), 1.0);
        assert_relative_eq!(n.basis_function(1, 0.0), 2f64.sqrt());
    }
}
