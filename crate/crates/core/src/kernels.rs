//! Scalar memory kernels `a(z) = β z^m e^{-γz}`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use statrs::function::gamma::{gamma, gamma_ur};
use thiserror::Error;

use crate::quadrature::{self, QuadError, QuadOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel argument {0} lies in the left half-plane")]
    OutsideSector(Complex64),
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed kernel spec '{0}' (expected exp:beta,gamma or mexp:beta,gamma,m)")]
    Malformed(String),
    #[error("integrability exponent must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("horizon must be non-negative, got {0}")]
    BadHorizon(f64),
    #[error("kernel norm quadrature failed: {0}")]
    Accuracy(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemoryKernel {
    Exponential { beta: f64, gamma: f64 },
    MonomialExponential { beta: f64, gamma: f64, m: u32 },
}

impl MemoryKernel {
    pub fn exponential(beta: f64, gamma: f64) -> Result<Self, KernelError> {
        check_nonnegative("beta", beta)?;
        check_positive("gamma", gamma)?;
        Ok(Self::Exponential { beta, gamma })
    }

    pub fn monomial_exponential(beta: f64, gamma: f64, m: u32) -> Result<Self, KernelError> {
        check_nonnegative("beta", beta)?;
        check_positive("gamma", gamma)?;
        Ok(Self::MonomialExponential { beta, gamma, m })
    }

    pub fn beta(&self) -> f64 {
        match *self {
            Self::Exponential { beta, .. } | Self::MonomialExponential { beta, .. } => beta,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            Self::Exponential { gamma, .. } | Self::MonomialExponential { gamma, .. } => gamma,
        }
    }

    pub fn degree(&self) -> u32 {
        match *self {
            Self::Exponential { .. } => 0,
            Self::MonomialExponential { m, .. } => m,
        }
    }

    /// True when the kernel is a pure exponential, so its convolution
    /// satisfies a first-order ODE.
    pub fn is_exponential(&self) -> bool {
        self.degree() == 0
    }

    /// Same family with `β` replaced.
    pub fn with_beta(&self, beta: f64) -> Self {
        match *self {
            Self::Exponential { gamma, .. } => Self::Exponential { beta, gamma },
            Self::MonomialExponential { gamma, m, .. } => Self::MonomialExponential { beta, gamma, m },
        }
    }

    /// Closed-form value at a complex argument with `Re z >= 0`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64, KernelError> {
        if z.re < 0.0 || z.re.is_nan() || z.im.is_nan() {
            return Err(KernelError::OutsideSector(z));
        }
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        let e = (-self.gamma() * z).exp() * self.beta();
        match self.degree() {
            0 => e,
            m => z.powu(m) * e,
        }
    }

    /// Real evaluation on the half-line.
    pub fn eval_real(&self, t: f64) -> f64 {
        let e = self.beta() * (-self.gamma() * t).exp();
        match self.degree() {
            0 => e,
            m => t.powi(m as i32) * e,
        }
    }

    /// Truncation point of the half-line used for infinite horizons.
    pub fn cutoff(&self) -> f64 {
        50.0 / self.gamma()
    }

    /// `∫_L^∞ |a(t)|^p dt` in closed form.
    pub fn lp_tail(&self, p: f64, from: f64) -> f64 {
        let c = p * self.gamma();
        let k = self.degree() as f64 * p;
        let bp = self.beta().powf(p);
        if self.degree() == 0 {
            return bp * (-c * from).exp() / c;
        }
        bp * gamma_ur(k + 1.0, c * from) * gamma(k + 1.0) / c.powf(k + 1.0)
    }

    /// `(∫_0^T |a(t)|^p dt)^{1/p}` for a pure exponential, in closed form.
    pub fn exponential_lp_closed_form(&self, p: f64, horizon: f64) -> Option<f64> {
        if !self.is_exponential() {
            return None;
        }
        let c = p * self.gamma();
        let frac = if horizon.is_infinite() {
            1.0
        } else {
            -(-c * horizon).exp_m1()
        };
        Some((self.beta().powf(p) * frac / c).powf(1.0 / p))
    }

    /// `(∫_0^T |a(t)|^p dt)^{1/p}` by adaptive quadrature; `T = ∞` is allowed.
    pub fn lp_halfline_norm(&self, p: f64, horizon: f64) -> Result<f64, KernelError> {
        Ok(self.lp_halfline_norm_with_error(p, horizon, QuadOptions::default())?.0)
    }

    /// Returns `(norm, error estimate of the p-th power)`.
    pub fn lp_halfline_norm_with_error(
        &self,
        p: f64,
        horizon: f64,
        opts: QuadOptions,
    ) -> Result<(f64, f64), KernelError> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(KernelError::BadExponent(p));
        }
        if !(horizon >= 0.0) {
            return Err(KernelError::BadHorizon(horizon));
        }
        if horizon == 0.0 {
            return Ok((0.0, 0.0));
        }
        let cutoff = self.cutoff();
        let upper = horizon.min(cutoff);
        let body = quadrature::integrate(|t| self.eval_real(t).abs().powf(p), 0.0, upper, opts)?;
        let mut total = body.value;
        if horizon > cutoff {
            total += self.lp_tail(p, cutoff);
            if horizon.is_finite() {
                total -= self.lp_tail(p, horizon);
            }
        }
        Ok((total.max(0.0).powf(1.0 / p), body.error))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), KernelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<(), KernelError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter(format!(
            "{name} must be non-negative and finite, got {v}"
        )))
    }
}

impl fmt::Display for MemoryKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { beta, gamma } => write!(f, "exp:{beta},{gamma}"),
            Self::MonomialExponential { beta, gamma, m } => write!(f, "mexp:{beta},{gamma},{m}"),
        }
    }
}

impl FromStr for MemoryKernel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || KernelError::Malformed(s.to_string());
        let (family, args) = s.trim().split_once(':').ok_or_else(malformed)?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let num = |x: &str| x.parse::<f64>().map_err(|_| malformed());
        match (family, parts.as_slice()) {
            ("exp", [b, g]) => Self::exponential(num(b)?, num(g)?),
            ("mexp", [b, g, m]) => {
                let m = m.parse::<u32>().map_err(|_| malformed())?;
                Self::monomial_exponential(num(b)?, num(g)?, m)
            }
            _ => Err(malformed()),
        }
    }
}
