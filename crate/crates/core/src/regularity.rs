//! `L^p`-in-time norms, admissibility constants, and the quantitative chain
//! behind the maximal-regularity estimate for the Volterra problem.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::bergman::{bergman_norm, BergmanError, EmbeddingParams, SectorSpec};
use crate::kernels::MemoryKernel;
use crate::quadrature::{self, simpson_uniform, QuadError, QuadOptions};
use crate::spectral::{SpectralError, SpectralOperator, StateVector};
use crate::volterra::{self, Forcing, Trajectory, VolterraError, VolterraProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularityError {
    #[error("time exponent p = {0} must lie in (1, ∞)")]
    BadExponent(f64),
    #[error("window must be positive, got {0}")]
    BadWindow(f64),
    #[error("ensemble size must be positive")]
    EmptyEnsemble,
    #[error("state has {got} modes, operator has {expected}")]
    ModeMismatch { expected: usize, got: usize },
    #[error("history trace bound needs q > 2p (q = {q}, p = {p})")]
    TraceExponent { q: f64, p: f64 },
    #[error("sample {sample} (seed {seed}): {source}")]
    Sample {
        sample: usize,
        seed: u64,
        source: VolterraError,
    },
    #[error(transparent)]
    Volterra(#[from] VolterraError),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

fn check_p(p: f64) -> Result<(), RegularityError> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(RegularityError::BadExponent(p))
    }
}

/// `(∫_0^T ‖x(t)‖^p dt)^{1/p}` by composite Simpson on `‖x_j‖^p`.
pub fn lp_time_norm(samples: &[StateVector], p: f64, dt: f64) -> Result<f64, RegularityError> {
    check_p(p)?;
    let vals: Vec<f64> = samples.iter().map(|x| x.norm().powf(p)).collect();
    Ok(simpson_uniform(&vals, dt)?.max(0.0).powf(1.0 / p))
}

/// Observation operator `C` applied along the semigroup.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// `C = (-A)^α`.
    FractionalPower(f64),
    /// `Cx = (⟨x, k_i⟩)_i`; an empty list is the zero operator.
    Bounded(Vec<StateVector>),
}

impl Observation {
    pub fn tag(&self) -> String {
        match self {
            Self::FractionalPower(a) => format!("frac_power({a})"),
            Self::Bounded(r) => format!("bounded({})", r.len()),
        }
    }

    fn check(&self, op: &SpectralOperator) -> Result<(), RegularityError> {
        match self {
            Self::FractionalPower(a) if !(*a > 0.0 && *a <= 1.0) => Err(SpectralError::BadExponent(*a).into()),
            Self::Bounded(reps) => match reps.iter().find(|r| r.len() != op.modes()) {
                Some(r) => Err(RegularityError::ModeMismatch {
                    expected: op.modes(),
                    got: r.len(),
                }),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// `‖C T(t) x‖`.
    pub fn output_norm(&self, op: &SpectralOperator, t: f64, x: &StateVector) -> f64 {
        let lam = op.eigenvalues();
        match self {
            Self::FractionalPower(a) => lam
                .iter()
                .zip(x.as_slice())
                .map(|(l, c)| {
                    let v = l.powf(*a) * (-l * t).exp() * c;
                    v * v
                })
                .sum::<f64>()
                .sqrt(),
            Self::Bounded(reps) => reps
                .iter()
                .map(|r| {
                    let v: f64 = lam
                        .iter()
                        .zip(x.as_slice())
                        .zip(r.as_slice())
                        .map(|((l, c), k)| (-l * t).exp() * c * k)
                        .sum();
                    v * v
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Gram matrix of `x ↦ ∫_0^w ‖CT(t)x‖² dt`.
    fn gram(&self, op: &SpectralOperator, window: f64) -> DMatrix<f64> {
        let lam = op.eigenvalues();
        let n = lam.len();
        let decay = |s: f64| {
            if window.is_infinite() {
                1.0 / s
            } else {
                -(-s * window).exp_m1() / s
            }
        };
        match self {
            Self::FractionalPower(a) => DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    lam[i].powf(2.0 * a) * decay(2.0 * lam[i])
                } else {
                    0.0
                }
            }),
            Self::Bounded(reps) => DMatrix::from_fn(n, n, |i, j| {
                let kk: f64 = reps.iter().map(|r| r[i] * r[j]).sum();
                kk * decay(lam[i] + lam[j])
            }),
        }
    }
}

/// Upper end of the integration range: a finite window, or the point past
/// which the slowest mode's contribution is below round-off.
fn effective_window(op: &SpectralOperator, p: f64, window: f64) -> f64 {
    if window.is_finite() {
        window
    } else {
        80.0 / (p * op.eigenvalues()[0])
    }
}

/// Integrates `g` over `[0, w]` on geometric pieces starting at `1/λ_N`,
/// so layers of every mode are resolved.
fn integrate_layered(op: &SpectralOperator, w: f64, g: impl Fn(f64) -> f64) -> Result<f64, QuadError> {
    let lam_max = *op.eigenvalues().last().unwrap_or(&1.0);
    let mut cuts = vec![0.0];
    let mut b = 1.0 / lam_max;
    while b < w {
        cuts.push(b);
        b *= 4.0;
    }
    cuts.push(w);
    let opts = QuadOptions::with_rel_tol(1e-11);
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        total += quadrature::integrate(&g, pair[0], pair[1], opts)?.value;
    }
    Ok(total)
}

/// `∫_0^w ‖C T(t) x‖^p dt`; `w = ∞` is allowed.
pub fn observation_energy(
    op: &SpectralOperator,
    obs: &Observation,
    p: f64,
    window: f64,
    x: &StateVector,
) -> Result<f64, RegularityError> {
    check_p(p)?;
    obs.check(op)?;
    if x.len() != op.modes() {
        return Err(RegularityError::ModeMismatch {
            expected: op.modes(),
            got: x.len(),
        });
    }
    if !(window > 0.0) {
        return Err(RegularityError::BadWindow(window));
    }
    let w = effective_window(op, p, window);
    Ok(integrate_layered(op, w, |t| obs.output_norm(op, t, x).powf(p))?)
}

/// Probe states used for the admissibility estimate, in addition to the
/// basis vectors and, for `p = 2`, the exact worst direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSet {
    pub random: usize,
    pub seed: u64,
}

impl Default for ProbeSet {
    fn default() -> Self {
        Self { random: 32, seed: 0 }
    }
}

/// Seeded Gaussian unit vector.
pub fn random_unit_vector(rng: &mut impl Rng, n: usize) -> StateVector {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let x = StateVector::new(v);
        let norm = x.norm();
        if norm > 1e-12 {
            return x.scaled(1.0 / norm);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub p: f64,
    pub window: f64,
    pub operator: String,
    /// `max_x (∫_0^window ‖C T(t)x‖^p dt)^{1/p}` over unit probe states.
    pub gamma_hat: f64,
    pub attaining_direction: StateVector,
    pub samples: usize,
}

pub fn admissibility_constant(
    op: &SpectralOperator,
    obs: &Observation,
    p: f64,
    window: f64,
    probes: ProbeSet,
) -> Result<AdmissibilityReport, RegularityError> {
    check_p(p)?;
    obs.check(op)?;
    if !(window > 0.0) {
        return Err(RegularityError::BadWindow(window));
    }
    let n = op.modes();
    let mut candidates: Vec<StateVector> = (0..n).map(|k| StateVector::basis(n, k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(probes.seed);
    candidates.extend((0..probes.random).map(|_| random_unit_vector(&mut rng, n)));
    if p == 2.0 {
        let eig = SymmetricEigen::new(obs.gram(op, window));
        let top = eig.eigenvalues.imax();
        let v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        candidates.push(StateVector::new(v));
    }
    let energies: Result<Vec<f64>, RegularityError> = candidates
        .par_iter()
        .map(|x| observation_energy(op, obs, p, window, x))
        .collect();
    let energies = energies?;
    let (best, e) = energies.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc },
    );
    Ok(AdmissibilityReport {
        p,
        window,
        operator: obs.tag(),
        gamma_hat: e.max(0.0).powf(1.0 / p),
        attaining_direction: candidates.swap_remove(best),
        samples: energies.len(),
    })
}

/// Bound `γ_T` on the input-output map `g ↦ (-A)^α ∫_0^t T(t-s)g(s) ds` in
/// `L^p(0,T; X)`. For `p = 2` the map is a diagonal family of scalar
/// convolutions and `max_k λ_k^{α-1}(1-e^{-λ_k T})` bounds it; otherwise
/// Young's inequality with `∫_0^T max_k λ_k^α e^{-λ_k t} dt` is used.
pub fn input_output_constant(op: &SpectralOperator, alpha: f64, p: f64, horizon: f64) -> Result<f64, RegularityError> {
    check_p(p)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(RegularityError::BadWindow(horizon));
    }
    let lam = op.eigenvalues();
    if p == 2.0 {
        return Ok(lam
            .iter()
            .map(|l| l.powf(alpha - 1.0) * -(-l * horizon).exp_m1())
            .fold(0.0, f64::max));
    }
    Ok(integrate_layered(op, horizon, |t| {
        lam.iter().map(|l| l.powf(alpha) * (-l * t).exp()).fold(0.0, f64::max)
    })?)
}

/// Maximal-regularity constant of the memoryless problem `ż = Az + g` on
/// `[0,T]`, bounding `‖ż‖ + ‖Az‖ + ‖z‖` by `κ₀ ‖g‖`.
pub fn memoryless_constant(op: &SpectralOperator, p: f64, horizon: f64) -> Result<f64, RegularityError> {
    check_p(p)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(RegularityError::BadWindow(horizon));
    }
    let lam = op.eigenvalues();
    if p == 2.0 {
        let l1 = lam[0];
        let az = lam.iter().map(|l| -(-l * horizon).exp_m1()).fold(0.0, f64::max);
        return Ok(1.0 + 2.0 * az + -(-l1 * horizon).exp_m1() / l1);
    }
    let az = integrate_layered(op, horizon, |t| {
        lam.iter().map(|l| l * (-l * t).exp()).fold(0.0, f64::max)
    })?;
    let z = -(-lam[0] * horizon).exp_m1() / lam[0];
    Ok(1.0 + 2.0 * az + z)
}

/// X-valued probe `f(t) = Σ_k c_k e^{-r_k t} e_k`, holomorphic on every sector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialProbe {
    pub coefficients: StateVector,
    pub rates: Vec<f64>,
}

impl ExponentialProbe {
    pub fn zero(n: usize) -> Self {
        Self {
            coefficients: StateVector::zeros(n),
            rates: vec![1.0; n],
        }
    }

    pub fn random(rng: &mut impl Rng, n: usize) -> Self {
        Self {
            coefficients: StateVector::new((0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()),
            rates: (0..n).map(|_| rng.random_range(0.1..5.0)).collect(),
        }
    }

    pub fn norm_at(&self, t: f64) -> f64 {
        self.coefficients
            .as_slice()
            .iter()
            .zip(&self.rates)
            .map(|(c, r)| {
                let v = c * (-r * t).exp();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Constants shared by every probe of the perturbation estimate
/// `∫_0^w ‖𝒫𝒯(t)(x,f)‖^p ≤ 2^{p-1}(‖a‖^p γ̂^p ‖x‖^p + ∫_0^w ‖f‖^p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSetup {
    op: SpectralOperator,
    alpha: f64,
    p: f64,
    window: f64,
    pub kernel_norm: f64,
    pub gamma_hat: f64,
}

impl PerturbationSetup {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kernel: &MemoryKernel,
        op: &SpectralOperator,
        alpha: f64,
        p: f64,
        q: f64,
        theta: f64,
        window: f64,
        probes: ProbeSet,
    ) -> Result<Self, RegularityError> {
        check_p(p)?;
        if !(window > 0.0 && window.is_finite()) {
            return Err(RegularityError::BadWindow(window));
        }
        if !(q > 2.0) {
            return Err(BergmanError::Constraint(format!("q = {q} must exceed 2")).into());
        }
        let kernel_norm = bergman_norm(kernel, SectorSpec::new(theta, q)?)?.norm;
        let gamma_hat = admissibility_constant(op, &Observation::FractionalPower(alpha), p, window, probes)?.gamma_hat;
        Ok(Self {
            op: op.clone(),
            alpha,
            p,
            window,
            kernel_norm,
            gamma_hat,
        })
    }

    /// The left side uses `𝒫𝒯(t)(x,f) = (f(t), a(·) F T(t)x)` with the
    /// product norm `‖f(t)‖ + ‖a‖_B ‖F T(t)x‖`.
    pub fn check(&self, x: &StateVector, f: &ExponentialProbe) -> Result<PerturbationCheck, RegularityError> {
        if x.len() != self.op.modes() || f.coefficients.len() != self.op.modes() {
            return Err(RegularityError::ModeMismatch {
                expected: self.op.modes(),
                got: x.len().min(f.coefficients.len()),
            });
        }
        let (p, a) = (self.p, self.kernel_norm);
        let obs = Observation::FractionalPower(self.alpha);
        let lhs = integrate_layered(&self.op, self.window, |t| {
            (f.norm_at(t) + a * obs.output_norm(&self.op, t, x)).powf(p)
        })?;
        let f_energy = integrate_layered(&self.op, self.window, |t| f.norm_at(t).powf(p))?;
        let rhs = 2f64.powf(p - 1.0) * ((a * self.gamma_hat * x.norm()).powf(p) + f_energy);
        Ok(PerturbationCheck {
            lhs,
            rhs,
            satisfied: lhs <= rhs * (1.0 + 1e-9),
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn perturbation_admissibility_bound(
    kernel: &MemoryKernel,
    op: &SpectralOperator,
    alpha: f64,
    p: f64,
    q: f64,
    theta: f64,
    window: f64,
    x: &StateVector,
    f: &ExponentialProbe,
) -> Result<PerturbationCheck, RegularityError> {
    PerturbationSetup::new(kernel, op, alpha, p, q, theta, window, ProbeSet::default())?.check(x, f)
}

/// Left and right side of `‖w‖_{L^p} ≤ T^{(p-1)/p} C_T ‖a‖_{B^q_θ} ‖(-A)^α z‖_{L^p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBound {
    pub lhs: f64,
    pub rhs: f64,
    /// Embedding exponent with `q(s-1)/s = p`.
    pub s: f64,
    pub c_t: f64,
    pub kernel_norm: f64,
    pub fz_norm: f64,
}

impl TraceBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9)
    }
}

/// Embedding with `p_{s,q} = p` and the kernel's Bergman norm on its working sector.
fn trace_constants(
    kernel: &MemoryKernel,
    p: f64,
    q: f64,
    theta: f64,
    horizon: f64,
) -> Result<(f64, f64, f64), RegularityError> {
    if !(q > 2.0 * p) {
        return Err(RegularityError::TraceExponent { q, p });
    }
    let s = q / (q - p);
    let params = EmbeddingParams::new(q, s, theta, None)?;
    let c_t = params.constant(horizon).c_r;
    let kernel_norm = bergman_norm(kernel, SectorSpec::new(params.working_theta(), q)?)?.norm;
    Ok((s, c_t, kernel_norm))
}

pub fn history_trace_bound(
    prob: &VolterraProblem,
    traj: &Trajectory,
    p: f64,
    q: f64,
    theta: f64,
) -> Result<TraceBound, RegularityError> {
    check_p(p)?;
    let (s, c_t, kernel_norm) = trace_constants(prob.kernel(), p, q, theta, prob.horizon())?;
    let dt = prob.dt();
    let lhs = lp_time_norm(&traj.w, p, dt)?;
    let fz: Vec<StateVector> = traj
        .z
        .iter()
        .map(|z| prob.op().fractional_power_apply(prob.alpha(), z))
        .collect::<Result<_, _>>()?;
    let fz_norm = lp_time_norm(&fz, p, dt)?;
    let rhs = prob.horizon().powf((p - 1.0) / p) * c_t * kernel_norm * fz_norm;
    Ok(TraceBound {
        lhs,
        rhs,
        s,
        c_t,
        kernel_norm,
        fz_norm,
    })
}

/// Inputs of `β_T = γ_T T^{(p-1)/p} C_T ‖a‖_{B^q_θ}` and the resulting bound
/// `(‖ż‖+‖Az‖+‖z‖)/‖f‖ ≤ κ₀/(1-β_T)` when `β_T < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionBound {
    pub q: f64,
    pub s: f64,
    pub theta: f64,
    pub gamma_t: f64,
    pub c_t: f64,
    pub kernel_norm: f64,
    pub beta_t: f64,
    pub kappa0: f64,
    pub contracts: bool,
    pub ratio_bound: Option<f64>,
}

pub fn contraction_bound(
    op: &SpectralOperator,
    alpha: f64,
    kernel: &MemoryKernel,
    p: f64,
    horizon: f64,
    q: f64,
    theta: f64,
) -> Result<ContractionBound, RegularityError> {
    let (s, c_t, kernel_norm) = trace_constants(kernel, p, q, theta, horizon)?;
    let gamma_t = input_output_constant(op, alpha, p, horizon)?;
    let kappa0 = memoryless_constant(op, p, horizon)?;
    let beta_t = gamma_t * horizon.powf((p - 1.0) / p) * c_t * kernel_norm;
    let contracts = beta_t < 1.0;
    Ok(ContractionBound {
        q,
        s,
        theta,
        gamma_t,
        c_t,
        kernel_norm,
        beta_t,
        kappa0,
        contracts,
        ratio_bound: contracts.then(|| kappa0 / (1.0 - beta_t)),
    })
}

/// Grid and model shared by all ensemble members of [`maxreg_verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxRegTemplate {
    pub op: SpectralOperator,
    pub alpha: f64,
    pub kernel: MemoryKernel,
    pub dt: f64,
    pub steps: usize,
    /// Forcing occupies modes `< band`.
    pub band: usize,
    /// Bergman exponent for the contraction check; `None` selects `3p`.
    pub q: Option<f64>,
    pub theta: f64,
}

impl MaxRegTemplate {
    pub fn new(op: SpectralOperator, alpha: f64, kernel: MemoryKernel, dt: f64, steps: usize) -> Self {
        let band = (op.modes() / 2).max(1);
        Self {
            op,
            alpha,
            kernel,
            dt,
            steps,
            band,
            q: None,
            theta: FRAC_PI_4,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn problem(&self, forcing: Forcing) -> Result<VolterraProblem, VolterraError> {
        VolterraProblem::new(self.op.clone(), self.alpha, self.kernel, forcing)
    }
}

/// Seed of ensemble member `i`; independent of the ensemble size.
pub fn sample_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleNorms {
    pub seed: u64,
    pub zdot: f64,
    pub az: f64,
    pub z: f64,
    pub f: f64,
    pub w: f64,
    /// `(‖ż‖+‖Az‖+‖z‖)/‖f‖`; `None` when `f = 0`.
    pub ratio: Option<f64>,
    pub trace: TraceBound,
}

pub fn sample_norms(
    prob: &VolterraProblem,
    traj: &Trajectory,
    p: f64,
    seed: u64,
    q: f64,
    theta: f64,
) -> Result<SampleNorms, RegularityError> {
    let dt = prob.dt();
    let zdot = lp_time_norm(&traj.zdot, p, dt)?;
    let az = lp_time_norm(&traj.az, p, dt)?;
    let z = lp_time_norm(&traj.z, p, dt)?;
    let fs: Vec<StateVector> = prob.forcing().grid().cloned().collect();
    let f = lp_time_norm(&fs, p, dt)?;
    let w = lp_time_norm(&traj.w, p, dt)?;
    let trace = history_trace_bound(prob, traj, p, q, theta)?;
    Ok(SampleNorms {
        seed,
        zdot,
        az,
        z,
        f,
        w,
        ratio: (f > 0.0).then(|| (zdot + az + z) / f),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub p: f64,
    pub horizon: f64,
    pub samples: Vec<SampleNorms>,
    pub max_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub contraction: ContractionBound,
}

impl RegularityReport {
    /// Max ratio over the first `n` samples.
    pub fn prefix_max(&self, n: usize) -> Option<f64> {
        self.samples.iter().take(n).filter_map(|s| s.ratio).reduce(f64::max)
    }

    pub fn trace_bound_holds(&self) -> bool {
        self.samples.iter().all(|s| s.trace.holds())
    }
}

/// Per-sample results for members `0..ensemble`, in order. Member `i`
/// depends only on `(seed, i)`.
pub fn ensemble_samples(
    template: &MaxRegTemplate,
    p: f64,
    q: f64,
    ensemble: usize,
    seed: u64,
) -> Vec<Result<SampleNorms, RegularityError>> {
    let n = template.op.modes();
    (0..ensemble)
        .into_par_iter()
        .map(|i| {
            let s = sample_seed(seed, i);
            let wrap = |source| RegularityError::Sample {
                sample: i,
                seed: s,
                source,
            };
            let forcing = Forcing::random_band_limited(n, template.band, template.dt, template.steps, s);
            let prob = template.problem(forcing).map_err(wrap)?;
            let traj = volterra::solve(&prob).map_err(wrap)?;
            sample_norms(&prob, &traj, p, s, q, template.theta)
        })
        .collect()
}

/// Solves an ensemble of seeded band-limited forcings and collects the
/// `L^p` norms entering the maximal-regularity estimate.
pub fn maxreg_verify(
    template: &MaxRegTemplate,
    p: f64,
    ensemble: usize,
    seed: u64,
) -> Result<RegularityReport, RegularityError> {
    check_p(p)?;
    if ensemble == 0 {
        return Err(RegularityError::EmptyEnsemble);
    }
    let q = template.q.unwrap_or(3.0 * p);
    let horizon = template.horizon();
    let contraction = contraction_bound(
        &template.op,
        template.alpha,
        &template.kernel,
        p,
        horizon,
        q,
        template.theta,
    )?;
    let samples = ensemble_samples(template, p, q, ensemble, seed)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(p, horizon, samples, contraction))
}

pub fn summarize(p: f64, horizon: f64, samples: Vec<SampleNorms>, contraction: ContractionBound) -> RegularityReport {
    let ratios: Vec<f64> = samples.iter().filter_map(|s| s.ratio).collect();
    let max_ratio = ratios.iter().copied().reduce(f64::max);
    let mean_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    RegularityReport {
        p,
        horizon,
        samples,
        max_ratio,
        mean_ratio,
        contraction,
    }
}

/// Largest `T = T₀/2^k` (at most 20 halvings) with `β_T < 1`.
pub fn contracting_horizon(
    op: &SpectralOperator,
    alpha: f64,
    kernel: &MemoryKernel,
    p: f64,
    q: f64,
    theta: f64,
    start: f64,
) -> Result<Option<f64>, RegularityError> {
    let mut t = start;
    for _ in 0..=20 {
        if contraction_bound(op, alpha, kernel, p, t, q, theta)?.contracts {
            return Ok(Some(t));
        }
        t *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lp_norm_examples() {
        let c = StateVector::new(vec![3.0, 4.0]);
        let samples = vec![c.clone(); 11];
        assert_relative_eq!(lp_time_norm(&samples, 3.0, 0.1).unwrap(), 5.0, max_relative = 1e-12);
        let dt = 1e-3;
        let e: Vec<StateVector> = (0..=1000)
            .map(|j| StateVector::new(vec![(-(j as f64) * dt).exp()]))
            .collect();
        assert_relative_eq!(
            lp_time_norm(&e, 2.0, dt).unwrap(),
            ((1.0 - (-2.0f64).exp()) / 2.0).sqrt(),
            epsilon = 1e-8
        );
        assert!(lp_time_norm(&samples[..2], 2.0, 0.1).is_err());
        assert!(lp_time_norm(&samples, 1.0, 0.1).is_err());
    }

    #[test]
    fn admissibility_matches_diagonal_closed_form() {
        let op = SpectralOperator::dirichlet(8).unwrap();
        let obs = Observation::FractionalPower(0.5);
        for w in [0.01, 0.1, 1.0] {
            let r = admissibility_constant(&op, &obs, 2.0, w, ProbeSet::default()).unwrap();
            let exact = op
                .eigenvalues()
                .iter()
                .map(|l| ((1.0 - (-2.0 * l * w).exp()) / 2.0).sqrt())
                .fold(0.0, f64::max);
            assert_relative_eq!(r.gamma_hat, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn zero_observation() {
        let op = SpectralOperator::dirichlet(4).unwrap();
        let r = admissibility_constant(&op, &Observation::Bounded(vec![]), 2.0, 1.0, ProbeSet::default()).unwrap();
        assert_eq!(r.gamma_hat, 0.0);
    }

    #[test]
    fn bounded_observation_worst_direction_dominates() {
        let op = SpectralOperator::dirichlet(6).unwrap();
        let reps = vec![StateVector::new(vec![1.0, -1.0, 0.5, 0.0, 0.2, 0.1])];
        let obs = Observation::Bounded(reps);
        let r = admissibility_constant(&op, &obs, 2.0, 0.5, ProbeSet::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let x = random_unit_vector(&mut rng, 6);
            let e = observation_energy(&op, &obs, 2.0, 0.5, &x).unwrap();
            assert!(e.sqrt() <= r.gamma_hat * (1.0 + 1e-9));
        }
    }

    #[test]
    fn io_constant_shrinks_with_horizon() {
        let op = SpectralOperator::dirichlet(16).unwrap();
        let g: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&t| input_output_constant(&op, 0.5, 2.0, t).unwrap())
            .collect();
        assert!(g[0] > g[1] && g[1] > g[2]);
        let g3 = input_output_constant(&op, 0.5, 3.0, 0.1).unwrap();
        assert!(g3.is_finite() && g3 > 0.0);
    }

    #[test]
    fn trace_exponent_constraint() {
        let op = SpectralOperator::dirichlet(4).unwrap();
        let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
        assert!(matches!(
            contraction_bound(&op, 0.5, &k, 2.0, 1.0, 4.0, FRAC_PI_4),
            Err(RegularityError::TraceExponent { .. })
        ));
        assert!(contraction_bound(&op, 0.5, &k, 2.0, 1.0, 6.0, FRAC_PI_4).is_ok());
    }

    #[test]
    fn sample_seeds_are_distinct() {
        let s: Vec<u64> = (0..100).map(|i| sample_seed(7, i)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 100);
    }
}
