use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spectral::{BoundaryKind, SpectralOperator, StateVector};

/// Forcing sampled on the half-step grid `t = jΔt/2`, `j = 0..=2M`, so that
/// both grid values and midpoint values are available.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    dt: f64,
    steps: usize,
    half: Vec<StateVector>,
}

impl Forcing {
    pub fn from_fn(dt: f64, steps: usize, f: impl Fn(f64) -> StateVector) -> Self {
        let half = (0..=2 * steps).map(|j| f(0.5 * j as f64 * dt)).collect();
        Self { dt, steps, half }
    }

    pub fn zero(modes: usize, dt: f64, steps: usize) -> Self {
        Self::constant(StateVector::zeros(modes), dt, steps)
    }

    pub fn constant(x: StateVector, dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            half: vec![x; 2 * steps + 1],
        }
    }

    /// `f(t, x) = 1` expanded in the eigenbasis of `op`.
    pub fn spatially_constant(op: &SpectralOperator, dt: f64, steps: usize) -> Self {
        Self::constant(unit_function_coefficients(op), dt, steps)
    }

    /// Seeded Gaussian forcing on modes `< band`, smooth in time:
    /// `f_k(t) = a_k + b_k sin(2πt/T) + c_k cos(2πt/T)`.
    pub fn random_band_limited(modes: usize, band: usize, dt: f64, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let band = band.min(modes);
        let coeffs: Vec<[f64; 3]> = (0..band)
            .map(|_| {
                [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ]
            })
            .collect();
        let horizon = dt * steps as f64;
        let omega = 2.0 * PI / horizon;
        Self::from_fn(dt, steps, |t| {
            let (s, c) = (omega * t).sin_cos();
            let mut v = vec![0.0; modes];
            for (k, [a, b, cc]) in coeffs.iter().enumerate() {
                v[k] = a + b * s + cc * c;
            }
            StateVector::new(v)
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.half[0].len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Value at `t_j = jΔt`.
    pub fn at_grid(&self, j: usize) -> &StateVector {
        &self.half[2 * j]
    }

    /// Value at `(t_j + t_{j+1})/2`.
    pub fn at_mid(&self, j: usize) -> &StateVector {
        &self.half[2 * j + 1]
    }

    pub fn grid(&self) -> impl Iterator<Item = &StateVector> {
        self.half.iter().step_by(2)
    }

    pub fn is_finite(&self) -> bool {
        self.half.iter().all(StateVector::is_finite)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dt: self.dt,
            steps: self.steps,
            half: self.half.iter().map(|x| x.scaled(s)).collect(),
        }
    }

    /// Pointwise sum; `None` if the grids differ.
    pub fn sum(&self, other: &Forcing) -> Option<Forcing> {
        if self.steps != other.steps || self.dt != other.dt || self.modes() != other.modes() {
            return None;
        }
        Some(Self {
            dt: self.dt,
            steps: self.steps,
            half: self.half.iter().zip(&other.half).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Coefficients of the constant function 1 on (0,1).
pub fn unit_function_coefficients(op: &SpectralOperator) -> StateVector {
    let n = op.modes();
    let v = match op.kind() {
        BoundaryKind::Dirichlet => (1..=n)
            .map(|k| {
                if k % 2 == 1 {
                    2.0 * 2f64.sqrt() / (k as f64 * PI)
                } else {
                    0.0
                }
            })
            .collect(),
        BoundaryKind::Neumann => (0..n).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
    };
    StateVector::new(v)
}
