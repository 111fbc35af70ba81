//! Bergman-space machinery on sectors `Σ_θ = {|arg z| < θ}`.
//!
//! The norm `‖f‖_{B^q_θ} = (∬_{Σ_θ} |f(τ+iσ)|^q dτ dσ)^{1/q}` is computed
//! with a tensorized adaptive rule, τ outer and σ inner, on `τ ∈ (0, L]`,
//! plus an analytic bound for `τ > L`. [`EmbeddingParams`] assembles the
//! explicit constant `C_R` of the embedding
//! `‖f‖_{L^{p}(0,R)} ≤ C_R ‖f‖_{B^q_θ}` with `p = q(s-1)/s`.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use statrs::function::gamma::{gamma, gamma_ur};
use thiserror::Error;

use crate::kernels::{KernelError, MemoryKernel};
use crate::quadrature::{self, QuadError, QuadOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BergmanError {
    #[error("sector angle θ = {0} outside (0, π/2]")]
    BadAngle(f64),
    #[error("integrability exponent q = {0} must exceed 1")]
    BadExponent(f64),
    #[error("Bergman integral diverges at θ = {theta}: inner integral keeps growing with the σ-range")]
    Divergent { theta: f64 },
    #[error("embedding constraint violated: {0}")]
    Constraint(String),
    #[error("no s in (1,2) gives 1 < q(s-1)/s <= l for q = {q}, l = {l}")]
    NoAdmissibleExponent { q: f64, l: f64 },
    #[error("negative translation t = {0}")]
    NegativeShift(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A scalar function holomorphic on the right half-plane with exponential
/// decay `|f(τ+iσ)| ≲ poly · e^{-γτ}`.
pub trait SectorFunction: Sync {
    fn value(&self, z: Complex64) -> Complex64;

    /// Exponential decay rate in `Re z`; fixes the truncation point.
    fn decay_rate(&self) -> f64;

    /// Upper bound on `∫_{τ>from} ∫_{|σ|<τ tanθ} |f|^q`.
    fn sector_tail(&self, q: f64, tan_theta: f64, from: f64) -> f64;

    /// Restriction to the real half-line.
    fn real_value(&self, t: f64) -> f64 {
        self.value(Complex64::new(t, 0.0)).re
    }
}

impl SectorFunction for MemoryKernel {
    fn value(&self, z: Complex64) -> Complex64 {
        self.eval_unchecked(z)
    }

    fn decay_rate(&self) -> f64 {
        self.gamma()
    }

    fn sector_tail(&self, q: f64, tan_theta: f64, from: f64) -> f64 {
        // σ = τu factorizes |f|^q = β^q τ^{mq} (1+u²)^{mq/2} e^{-qγτ}
        let mq = self.degree() as f64 * q;
        let c = q * self.gamma();
        let angular = if self.degree() == 0 {
            2.0 * tan_theta
        } else {
            quadrature::integrate(
                |u| (1.0 + u * u).powf(0.5 * mq),
                -tan_theta,
                tan_theta,
                QuadOptions::default(),
            )
            .map(|r| r.value)
            .unwrap_or(f64::INFINITY)
        };
        self.beta().powf(q) * gamma_ur(mq + 2.0, c * from) * gamma(mq + 2.0) / c.powf(mq + 2.0) * angular
    }

    fn real_value(&self, t: f64) -> f64 {
        self.eval_real(t)
    }
}

/// `z ↦ f(z + t)`, the translation semigroup applied to a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Translated {
    pub kernel: MemoryKernel,
    pub shift: f64,
}

impl Translated {
    /// Closed form inside the family when one exists: `βe^{-γ(z+t)} = (βe^{-γt})e^{-γz}`.
    pub fn as_kernel(&self) -> Option<MemoryKernel> {
        if self.kernel.is_exponential() {
            Some(
                self.kernel
                    .with_beta(self.kernel.beta() * (-self.kernel.gamma() * self.shift).exp()),
            )
        } else {
            None
        }
    }
}

impl SectorFunction for Translated {
    fn value(&self, z: Complex64) -> Complex64 {
        self.kernel.eval_unchecked(z + self.shift)
    }

    fn decay_rate(&self) -> f64 {
        self.kernel.gamma()
    }

    fn sector_tail(&self, q: f64, tan_theta: f64, from: f64) -> f64 {
        // |z+t| <= |z|(1 + t/L) for Re z >= L
        let mq = self.kernel.degree() as f64 * q;
        (1.0 + self.shift / from).powf(mq)
            * (-q * self.kernel.gamma() * self.shift).exp()
            * self.kernel.sector_tail(q, tan_theta, from)
    }
}

/// Translation by `t >= 0`.
pub fn translation_apply(kernel: &MemoryKernel, t: f64) -> Result<Translated, BergmanError> {
    if !(t >= 0.0) {
        return Err(BergmanError::NegativeShift(t));
    }
    Ok(Translated {
        kernel: *kernel,
        shift: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorSpec {
    theta: f64,
    q: f64,
}

impl SectorSpec {
    pub fn new(theta: f64, q: f64) -> Result<Self, BergmanError> {
        if !(theta > 0.0 && theta <= FRAC_PI_2 + 1e-15) {
            return Err(BergmanError::BadAngle(theta));
        }
        if !(q > 1.0 && q.is_finite()) {
            return Err(BergmanError::BadExponent(q));
        }
        Ok(Self {
            theta: theta.min(FRAC_PI_2),
            q,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn is_half_plane(&self) -> bool {
        self.theta >= FRAC_PI_2 - 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BergmanNorm {
    pub norm: f64,
    /// Absolute error estimate on `norm`.
    pub error_estimate: f64,
}

/// `‖f‖_{B^q_θ}` with the default relative tolerance `1e-8`.
pub fn bergman_norm(f: &dyn SectorFunction, spec: SectorSpec) -> Result<BergmanNorm, BergmanError> {
    bergman_norm_with_tol(f, spec, 1e-8)
}

pub fn bergman_norm_with_tol(
    f: &dyn SectorFunction,
    spec: SectorSpec,
    rel_tol: f64,
) -> Result<BergmanNorm, BergmanError> {
    let q = spec.q;
    if spec.is_half_plane() {
        return half_plane_norm(f, spec, rel_tol);
    }
    let a = spec.theta.tan();
    let cutoff = 50.0 / f.decay_rate();
    let inner_opts = QuadOptions::with_rel_tol(rel_tol * 1e-2);
    let inner_err = Cell::new(0.0f64);
    let inner_fail: Cell<Option<QuadError>> = Cell::new(None);
    let outer = quadrature::integrate(
        |tau| {
            if tau == 0.0 {
                return 0.0;
            }
            match quadrature::integrate(
                |sigma| f.value(Complex64::new(tau, sigma)).norm().powf(q),
                -tau * a,
                tau * a,
                inner_opts,
            ) {
                Ok(r) => {
                    inner_err.set(inner_err.get().max(r.error / r.value.abs().max(1e-300)));
                    r.value
                }
                Err(e) => {
                    inner_fail.set(Some(e));
                    0.0
                }
            }
        },
        0.0,
        cutoff,
        QuadOptions::with_rel_tol(rel_tol),
    )?;
    if let Some(e) = inner_fail.take() {
        return Err(e.into());
    }
    let tail = f.sector_tail(q, a, cutoff);
    let total = outer.value + tail;
    let abs_err_q = outer.error + inner_err.get() * outer.value.abs() + tail;
    let norm = total.powf(1.0 / q);
    Ok(BergmanNorm {
        norm,
        error_estimate: abs_err_q / (q * total.powf((q - 1.0) / q)).max(1e-300),
    })
}

fn half_plane_norm(f: &dyn SectorFunction, spec: SectorSpec, rel_tol: f64) -> Result<BergmanNorm, BergmanError> {
    let q = spec.q;
    let tau0 = 1.0 / f.decay_rate();
    let strip = |half: f64| -> Result<f64, BergmanError> {
        Ok(quadrature::integrate(
            |sigma| f.value(Complex64::new(tau0, sigma)).norm().powf(q),
            -half,
            half,
            QuadOptions::with_rel_tol(1e-8),
        )?
        .value)
    };
    let i1 = strip(10.0)?;
    let i2 = strip(100.0)?;
    let i3 = strip(1000.0)?;
    let grow_a = i2 - i1;
    let grow_b = i3 - i2;
    if !i3.is_finite() || (grow_b > 0.5 * grow_a && grow_b > 1e-12 * i3.abs()) {
        return Err(BergmanError::Divergent { theta: spec.theta });
    }
    // integrable in σ: treat the half-plane as a very wide sector
    let wide = SectorSpec {
        theta: FRAC_PI_2 * (1.0 - 1e-6),
        q,
    };
    bergman_norm_with_tol(f, wide, rel_tol)
}

/// Proof angle and derived constants for the Bergman-to-`L^p(0,R)` embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingParams {
    q: f64,
    s: f64,
    theta: f64,
    /// Angle the constants are evaluated at; equals `theta` unless the
    /// half-plane is requested, which is reduced to a proxy sector.
    working_theta: f64,
    alpha: f64,
}

/// Proxy sector for `θ = π/2`: `‖f‖_{B_{π/4}} ≤ ‖f‖_{B_{π/2}}`.
pub const HALF_PLANE_PROXY_ANGLE: f64 = FRAC_PI_4;

/// Itemized constant chain for a given `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstant {
    pub c_r: f64,
    /// `(4α)^{p-1} / (2π(1-c))^p`, from the two Cauchy arcs.
    pub arc_prefactor: f64,
    /// Jacobian lower bound `|J| >= c₁ x`.
    pub jacobian_bound: f64,
    /// `R`-independent factor `C̃`.
    pub c_tilde: f64,
    /// Overhang `δ = R(1-c)a` of the covering region.
    pub delta: f64,
}

impl EmbeddingParams {
    /// `alpha = None` selects `arccos(min(0.9, 0.9/a))`.
    pub fn new(q: f64, s: f64, theta: f64, alpha: Option<f64>) -> Result<Self, BergmanError> {
        if !(q > 2.0 && q.is_finite()) {
            return Err(BergmanError::Constraint(format!("q = {q} must exceed 2")));
        }
        if !(s > 1.0 && s < 2.0) {
            return Err(BergmanError::Constraint(format!("s = {s} must lie in (1,2)")));
        }
        if !(theta > 0.0 && theta <= FRAC_PI_2 + 1e-15) {
            return Err(BergmanError::BadAngle(theta));
        }
        let p = q * (s - 1.0) / s;
        if p <= 1.0 {
            return Err(BergmanError::Constraint(format!(
                "p = q(s-1)/s = {p} must exceed 1 (need s > q/(q-1))"
            )));
        }
        let working_theta = if theta >= FRAC_PI_2 - 1e-12 {
            HALF_PLANE_PROXY_ANGLE
        } else {
            theta
        };
        let a = working_theta.tan();
        let alpha = alpha.unwrap_or_else(|| (0.9f64).min(0.9 / a).acos());
        if !(alpha > 0.0 && alpha < FRAC_PI_2) {
            return Err(BergmanError::Constraint(format!("α = {alpha} must lie in (0, π/2)")));
        }
        if a * alpha.cos() >= 1.0 {
            return Err(BergmanError::Constraint(format!(
                "ac = {} must be below 1",
                a * alpha.cos()
            )));
        }
        Ok(Self {
            q,
            s,
            theta: theta.min(FRAC_PI_2),
            working_theta,
            alpha,
        })
    }

    /// Same `(q, s, θ)` with `α` chosen on a grid to minimize `C_R`. The
    /// minimizer does not depend on `R`.
    pub fn optimized(q: f64, s: f64, theta: f64) -> Result<Self, BergmanError> {
        let base = Self::new(q, s, theta, None)?;
        let a = base.a();
        let lo = if a > 1.0 { (1.0 / a).acos() } else { 0.0 };
        let hi = FRAC_PI_2;
        let n = 512;
        let mut best = base;
        let mut best_val = base.constant(1.0).c_r;
        for i in 0..n {
            let alpha = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
            if let Ok(cand) = Self::new(q, s, theta, Some(alpha)) {
                let v = cand.constant(1.0).c_r;
                if v < best_val {
                    best = cand;
                    best_val = v;
                }
            }
        }
        Ok(best)
    }

    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn working_theta(&self) -> f64 {
        self.working_theta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// `a = tan θ` at the working angle.
    pub fn a(&self) -> f64 {
        self.working_theta.tan()
    }
    /// `c = cos α`.
    pub fn c(&self) -> f64 {
        self.alpha.cos()
    }
    /// `p_{s,q} = q(s-1)/s`.
    pub fn p(&self) -> f64 {
        self.q * (self.s - 1.0) / self.s
    }
    /// Hölder conjugate `s' = s/(s-1)`.
    pub fn s_conjugate(&self) -> f64 {
        self.s / (self.s - 1.0)
    }
    pub fn jacobian_bound(&self) -> f64 {
        let (a, c) = (self.a(), self.c());
        a * (c * (1.0 - a * c) + a) / (1.0 + a * (1.0 - c))
    }

    pub fn constant(&self, r: f64) -> EmbeddingConstant {
        let (a, c, s, p) = (self.a(), self.c(), self.s, self.p());
        let arc_prefactor = (4.0 * self.alpha).powf(p - 1.0) / (2.0 * PI * (1.0 - c)).powf(p);
        let jacobian_bound = self.jacobian_bound();
        let c_tilde = (2.0 * a * self.alpha.sin()).powf(1.0 / s) / jacobian_bound
            * (1.0 + (1.0 - c) * a).powf((2.0 - s) / s)
            / (2.0 - s).powf(1.0 / s);
        // both arcs contribute the same bound
        let c_r = (2.0 * arc_prefactor * c_tilde * r.powf((2.0 - s) / s)).powf(1.0 / p);
        EmbeddingConstant {
            c_r,
            arc_prefactor,
            jacobian_bound,
            c_tilde,
            delta: r * (1.0 - c) * a,
        }
    }
}

/// `C_R` for the embedding `L^{p_{s,q}}(0,R) ↪ B^q_θ`.
pub fn embedding_constant(params: &EmbeddingParams, r: f64) -> Result<f64, BergmanError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(BergmanError::Constraint(format!("R = {r} must be positive")));
    }
    Ok(params.constant(r).c_r)
}

/// One check of the embedding inequality for a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingCheck {
    pub r: f64,
    pub c_r: f64,
    pub lhs: f64,
    pub bergman_norm: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

pub fn check_embedding(
    kernel: &MemoryKernel,
    params: &EmbeddingParams,
    r: f64,
    rel_tol: f64,
) -> Result<EmbeddingCheck, BergmanError> {
    let c_r = embedding_constant(params, r)?;
    let lhs = kernel
        .lp_halfline_norm_with_error(params.p(), r, QuadOptions::with_rel_tol(rel_tol.min(1e-10)))?
        .0;
    let spec = SectorSpec::new(params.working_theta(), params.q())?;
    let norm = bergman_norm_with_tol(kernel, spec, rel_tol)?.norm;
    let rhs = c_r * norm;
    Ok(EmbeddingCheck {
        r,
        c_r,
        lhs,
        bergman_norm: norm,
        rhs,
        satisfied: lhs <= rhs * (1.0 + 1e-9),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentCase {
    /// `q <= l`
    BelowL,
    /// `l < q < 2l`
    Intermediate,
    /// `q >= 2l`
    AtLeastTwiceL,
}

impl ExponentCase {
    pub fn classify(q: f64, l: f64) -> Self {
        if q <= l {
            Self::BelowL
        } else if q >= 2.0 * l {
            Self::AtLeastTwiceL
        } else {
            Self::Intermediate
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ExponentCase::BelowL => "q<=l",
            ExponentCase::Intermediate => "l<q<2l",
            ExponentCase::AtLeastTwiceL => "q>=2l",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentChoice {
    pub s: f64,
    pub p: f64,
    pub case: ExponentCase,
}

/// Picks `s ∈ (1,2)` with `1 < p = q(s-1)/s <= l`.
///
/// The case interval for `s` is `(1, q/(q-l)]` when `q >= 2l` and `(1, 2)`
/// otherwise; its midpoint is returned when it satisfies `p > 1`. If not,
/// the interval is cut from below at `q/(q-1)` and the midpoint of what
/// remains is returned. For `q <= 2` nothing remains.
pub fn choose_exponent(q: f64, l: f64) -> Result<ExponentChoice, BergmanError> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(BergmanError::BadExponent(q));
    }
    if !(l > 1.0 && l.is_finite()) {
        return Err(BergmanError::BadExponent(l));
    }
    let p_of = |s: f64| q * (s - 1.0) / s;
    let case = ExponentCase::classify(q, l);
    let hi = match case {
        ExponentCase::AtLeastTwiceL => q / (q - l),
        _ => 2.0,
    };
    let mid = 0.5 * (1.0 + hi);
    let p = p_of(mid);
    if p > 1.0 && p <= l && mid < 2.0 {
        return Ok(ExponentChoice { s: mid, p, case });
    }
    let lo = q / (q - 1.0);
    if lo >= hi {
        return Err(BergmanError::NoAdmissibleExponent { q, l });
    }
    let s = 0.5 * (lo + hi);
    let p = p_of(s);
    if !(p > 1.0 && p <= l && s > 1.0 && s < 2.0) {
        return Err(BergmanError::NoAdmissibleExponent { q, l });
    }
    Ok(ExponentChoice { s, p, case })
}
