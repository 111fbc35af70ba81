//! Command-line front end: configuration, dispatch, and CSV emission.

mod config;

pub use config::{ExperimentConfig, Scenario};

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bergman::{
    bergman_norm_with_tol, check_embedding, choose_exponent, EmbeddingParams, ExponentCase, SectorSpec,
};
use crate::boundary::{solve_boundary_volterra, BoundarySystem, Feedback};
use crate::kernels::MemoryKernel;
use crate::regularity::{
    self, contraction_bound, ensemble_samples, lp_time_norm, MaxRegTemplate, Observation, ProbeSet,
};
use crate::spectral::{BoundaryKind, SpectralOperator, StateVector};
use crate::volterra::{residual_profile, solve_augmented, solve_cq, Forcing, Trajectory, VolterraProblem};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl HarnessError {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        Self::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn numerical(e: impl std::fmt::Display) -> Self {
        Self::Numerical(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 2,
            Self::Numerical(_) | Self::Io(_) => 3,
        }
    }
}

/// Formats a float so that it parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let written = w
            .write_record(&self.header)
            .and_then(|_| self.rows.iter().try_for_each(|r| w.write_record(r)));
        let bytes = written.and_then(|_| w.into_inner().map_err(|e| e.into_error().into()));
        String::from_utf8(bytes.expect("writing to memory")).expect("fields are UTF-8")
    }
}

/// Everything a run produces. `extra` tables go next to the primary output
/// as `<stem>.<suffix>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub table: Table,
    pub extra: Vec<(&'static str, Table)>,
    pub meta: Vec<(String, String)>,
}

impl Output {
    fn new(header: &[&'static str]) -> Self {
        Self {
            table: Table::new(header),
            extra: Vec::new(),
            meta: Vec::new(),
        }
    }

    fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn render_meta(&self) -> String {
        self.meta.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k}={v}");
            s
        })
    }
}

/// Result of [`run`]: on a numerical failure the rows computed so far are
/// kept in `output`.
#[derive(Debug)]
pub struct RunOutcome {
    pub output: Option<Output>,
    pub error: Option<HarnessError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, HarnessError::exit_code)
    }
}

/// Validates the whole config, then executes it.
pub fn run(cfg: &ExperimentConfig) -> RunOutcome {
    let plan = match Plan::from_config(cfg) {
        Ok(p) => p,
        Err(e) => {
            return RunOutcome {
                output: None,
                error: Some(e),
            }
        }
    };
    let mut out = plan.empty_output();
    out.meta("scenario", cfg.scenario);
    out.meta("checks", plan.checks());
    if let Some(seed) = cfg.seed {
        out.meta("seed", seed);
    }
    let error = plan.execute(&mut out).err();
    if let Some(e) = &error {
        out.meta("error", e);
    }
    RunOutcome {
        output: Some(out),
        error,
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Writes the primary CSV (to `out`, or stdout), the extra tables and the
/// `<out>.meta` sidecar.
pub fn write_output(out: &Output, path: Option<&Path>) -> io::Result<()> {
    use io::Write;
    match path {
        Some(p) => {
            fs::write(p, out.table.to_csv())?;
            for (suffix, t) in &out.extra {
                fs::write(sibling(p, suffix), t.to_csv())?;
            }
            let mut meta = p.as_os_str().to_owned();
            meta.push(".meta");
            fs::write(PathBuf::from(meta), out.render_meta())?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(out.table.to_csv().as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ForcingKind {
    Constant,
    SingleMode,
    Random,
}

fn parse_forcing(cfg: &ExperimentConfig) -> Result<ForcingKind, HarnessError> {
    match cfg.require("forcing")? {
        "const" => Ok(ForcingKind::Constant),
        "single-mode" => Ok(ForcingKind::SingleMode),
        "random" | "random-seeded" => Ok(ForcingKind::Random),
        other => Err(HarnessError::validation(
            "forcing",
            format!("'{other}' (expected const, single-mode or random)"),
        )),
    }
}

fn build_forcing(kind: ForcingKind, op: &SpectralOperator, dt: f64, steps: usize, seed: u64) -> Forcing {
    let n = op.modes();
    match kind {
        ForcingKind::Constant => Forcing::spatially_constant(op, dt, steps),
        ForcingKind::SingleMode => Forcing::constant(StateVector::basis(n, 0), dt, steps),
        ForcingKind::Random => Forcing::random_band_limited(n, (n / 2).max(1), dt, steps, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SolverChoice {
    Augmented,
    Cq,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
struct Grid {
    dt: f64,
    steps: usize,
}

fn parse_grid(cfg: &ExperimentConfig) -> Result<Grid, HarnessError> {
    let t: f64 = cfg.parse_value("T")?;
    let dt: f64 = cfg.parse_value("dt")?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(HarnessError::validation("T", format!("{t} must be positive")));
    }
    if !(dt > 0.0 && dt <= t) {
        return Err(HarnessError::validation("dt", format!("{dt} must lie in (0, T]")));
    }
    let steps = (t / dt).round() as usize;
    if steps < 2 || ((steps as f64) * dt - t).abs() > 1e-9 * t {
        return Err(HarnessError::validation(
            "dt",
            format!("T = {t} must be a multiple of dt = {dt} with at least 2 steps"),
        ));
    }
    if steps > 10_000_000 {
        return Err(HarnessError::validation("dt", format!("{steps} steps is too many")));
    }
    Ok(Grid { dt, steps })
}

fn parse_modes(cfg: &ExperimentConfig) -> Result<usize, HarnessError> {
    let n: usize = cfg.parse_value("modes")?;
    if n == 0 || n > 4096 {
        return Err(HarnessError::validation("modes", format!("{n} must lie in 1..=4096")));
    }
    Ok(n)
}

fn parse_alpha(cfg: &ExperimentConfig) -> Result<f64, HarnessError> {
    let a: f64 = cfg.parse_value("alpha")?;
    if !(a > 0.0 && a <= 0.5) {
        return Err(HarnessError::validation("alpha", format!("{a} must lie in (0, 1/2]")));
    }
    Ok(a)
}

fn parse_p(cfg: &ExperimentConfig) -> Result<f64, HarnessError> {
    let p: f64 = cfg.parse_value("p")?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(HarnessError::validation("p", format!("{p} must lie in (1, ∞)")));
    }
    Ok(p)
}

fn parse_theta(cfg: &ExperimentConfig) -> Result<f64, HarnessError> {
    let t: f64 = cfg.parse_value("theta")?;
    if !(t > 0.0 && t <= std::f64::consts::FRAC_PI_2 + 1e-15) {
        return Err(HarnessError::validation("theta", format!("{t} must lie in (0, π/2]")));
    }
    Ok(t)
}

fn parse_operator(cfg: &ExperimentConfig, modes: usize) -> Result<SpectralOperator, HarnessError> {
    let kind: BoundaryKind = cfg.parse_value("operator")?;
    SpectralOperator::new(kind, modes).map_err(|e| HarnessError::validation("operator", e.to_string()))
}

fn seed_or_default(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AlphaChoice {
    Default,
    Optimized,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Plan {
    Solve {
        template: VolterraProblem,
        solver: SolverChoice,
    },
    Boundary {
        sys: BoundarySystem,
    },
    Bergman {
        kernels: Vec<MemoryKernel>,
        spec: SectorSpec,
        tol: f64,
    },
    Lemma4 {
        kernels: Vec<MemoryKernel>,
        params: EmbeddingParams,
        radii: Vec<f64>,
        tol: f64,
    },
    Exponents {
        pairs: Vec<(f64, f64)>,
    },
    Admissibility {
        op: SpectralOperator,
        obs: Observation,
        p: f64,
        windows: Vec<f64>,
        probes: ProbeSet,
    },
    Ensemble {
        template: MaxRegTemplate,
        p: f64,
        q: f64,
        ensemble: usize,
        seed: u64,
        trace_only: bool,
    },
}

impl Plan {
    fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        if cfg.scenario.needs_seed() && cfg.seed.is_none() {
            return Err(HarnessError::validation("seed", "required for ensemble scenarios"));
        }
        let tol = cfg.tol.unwrap_or(1e-8);
        match cfg.scenario {
            Scenario::Solve => {
                let modes = parse_modes(cfg)?;
                let op = parse_operator(cfg, modes)?;
                let alpha = parse_alpha(cfg)?;
                let kernel: MemoryKernel = cfg.parse_value("kernel")?;
                let forcing = parse_forcing(cfg)?;
                let grid = parse_grid(cfg)?;
                let solver = match cfg.require("solver")? {
                    "aug" => SolverChoice::Augmented,
                    "cq" => SolverChoice::Cq,
                    "both" => SolverChoice::Both,
                    other => {
                        return Err(HarnessError::validation(
                            "solver",
                            format!("'{other}' (expected aug, cq or both)"),
                        ))
                    }
                };
                if solver != SolverChoice::Cq && !kernel.is_exponential() {
                    return Err(HarnessError::validation(
                        "solver",
                        format!("kernel {kernel} requires solver = cq"),
                    ));
                }
                let f = build_forcing(forcing, &op, grid.dt, grid.steps, seed_or_default(cfg));
                let template = VolterraProblem::new(op, alpha, kernel, f)
                    .map_err(|e| HarnessError::validation("forcing", e.to_string()))?;
                Ok(Plan::Solve { template, solver })
            }
            Scenario::Boundary => {
                let modes = parse_modes(cfg)?;
                let op =
                    SpectralOperator::dirichlet(modes).map_err(|e| HarnessError::validation("modes", e.to_string()))?;
                let alpha = parse_alpha(cfg)?;
                let kernel: MemoryKernel = cfg.parse_value("kernel")?;
                if !kernel.is_exponential() {
                    return Err(HarnessError::validation(
                        "kernel",
                        "boundary solver needs an exponential kernel",
                    ));
                }
                let knorm: f64 = cfg.parse_value("knorm")?;
                if !(knorm >= 0.0 && knorm.is_finite()) {
                    return Err(HarnessError::validation(
                        "knorm",
                        format!("{knorm} must be non-negative"),
                    ));
                }
                let forcing = parse_forcing(cfg)?;
                let grid = parse_grid(cfg)?;
                let f = build_forcing(forcing, &op, grid.dt, grid.steps, seed_or_default(cfg));
                let feedback = Feedback::lowest_modes(modes, knorm);
                let sys = BoundarySystem::new(op, alpha, kernel, feedback, f)
                    .map_err(|e| HarnessError::validation("boundary", e.to_string()))?;
                Ok(Plan::Boundary { sys })
            }
            Scenario::Bergman => {
                let kernels = cfg.parse_list("kernel")?;
                let q: f64 = cfg.parse_value("q")?;
                let theta = parse_theta(cfg)?;
                let spec = SectorSpec::new(theta, q).map_err(|e| HarnessError::validation("q", e.to_string()))?;
                Ok(Plan::Bergman { kernels, spec, tol })
            }
            Scenario::Lemma4 => {
                let kernels = cfg.parse_list("kernel")?;
                let q: f64 = cfg.parse_value("q")?;
                let s: f64 = cfg.parse_value("s")?;
                let theta = parse_theta(cfg)?;
                let alpha = match cfg.require("alpha")? {
                    "default" => AlphaChoice::Default,
                    "optimized" => AlphaChoice::Optimized,
                    _ => AlphaChoice::Fixed(cfg.parse_value("alpha")?),
                };
                let params = match alpha {
                    AlphaChoice::Default => EmbeddingParams::new(q, s, theta, None),
                    AlphaChoice::Fixed(a) => EmbeddingParams::new(q, s, theta, Some(a)),
                    AlphaChoice::Optimized => EmbeddingParams::optimized(q, s, theta),
                }
                .map_err(|e| HarnessError::validation("lemma4", e.to_string()))?;
                let radii: Vec<f64> = cfg.parse_list("R")?;
                if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                    return Err(HarnessError::validation("R", format!("{r} must be positive")));
                }
                Ok(Plan::Lemma4 {
                    kernels,
                    params,
                    radii,
                    tol,
                })
            }
            Scenario::Exponents => {
                let q: Option<f64> = cfg.parse_optional("q")?;
                let l: Option<f64> = cfg.parse_optional("l")?;
                let pairs = match (q, l) {
                    (Some(q), Some(l)) => vec![(q, l)],
                    (None, None) => {
                        let count: usize = cfg.parse_value("count")?;
                        let max: f64 = cfg.parse_value("max")?;
                        if !(max > 1.0 && max.is_finite()) {
                            return Err(HarnessError::validation("max", format!("{max} must exceed 1")));
                        }
                        let mut rng = ChaCha8Rng::seed_from_u64(seed_or_default(cfg));
                        (0..count)
                            .map(|_| (rng.random_range(1.0..max), rng.random_range(1.0..max)))
                            .filter(|(q, l)| *q > 1.0 && *l > 1.0)
                            .collect()
                    }
                    _ => return Err(HarnessError::validation("q", "q and l must be given together")),
                };
                if let Some((q, l)) = pairs
                    .iter()
                    .find(|(q, l)| !(*q > 1.0 && *l > 1.0 && q.is_finite() && l.is_finite()))
                {
                    return Err(HarnessError::validation(
                        "q",
                        format!("(q, l) = ({q}, {l}) must both exceed 1"),
                    ));
                }
                Ok(Plan::Exponents { pairs })
            }
            Scenario::Admissibility => {
                let modes = parse_modes(cfg)?;
                let op = parse_operator(cfg, modes)?;
                let obs = match cfg.require("observation")? {
                    "zero" => Observation::Bounded(vec![]),
                    o => match o.strip_prefix("frac:").map(str::parse::<f64>) {
                        Some(Ok(a)) if a > 0.0 && a <= 1.0 => Observation::FractionalPower(a),
                        _ => {
                            return Err(HarnessError::validation(
                                "observation",
                                format!("'{o}' (expected frac:<power in (0,1]> or zero)"),
                            ))
                        }
                    },
                };
                let p = parse_p(cfg)?;
                let windows: Vec<f64> = cfg.parse_list("window")?;
                if let Some(w) = windows.iter().find(|w| !(**w > 0.0)) {
                    return Err(HarnessError::validation("window", format!("{w} must be positive")));
                }
                let probes = ProbeSet {
                    random: cfg.parse_value("probes")?,
                    seed: seed_or_default(cfg),
                };
                Ok(Plan::Admissibility {
                    op,
                    obs,
                    p,
                    windows,
                    probes,
                })
            }
            Scenario::Maxreg | Scenario::TraceBound => {
                let modes = parse_modes(cfg)?;
                let op =
                    SpectralOperator::dirichlet(modes).map_err(|e| HarnessError::validation("modes", e.to_string()))?;
                let alpha = parse_alpha(cfg)?;
                let kernel: MemoryKernel = cfg.parse_value("kernel")?;
                let p = parse_p(cfg)?;
                let q: f64 = cfg.parse_optional("q")?.unwrap_or(3.0 * p);
                if !(q > 2.0 * p) {
                    return Err(HarnessError::validation(
                        "q",
                        format!("{q} must exceed 2p = {}", 2.0 * p),
                    ));
                }
                let theta = parse_theta(cfg)?;
                let grid = parse_grid(cfg)?;
                let ensemble: usize = cfg.parse_value("ensemble")?;
                if ensemble == 0 {
                    return Err(HarnessError::validation("ensemble", "must be positive"));
                }
                let mut template = MaxRegTemplate::new(op, alpha, kernel, grid.dt, grid.steps);
                template.q = Some(q);
                template.theta = theta;
                Ok(Plan::Ensemble {
                    template,
                    p,
                    q,
                    ensemble,
                    seed: cfg.seed.unwrap_or(0),
                    trace_only: cfg.scenario == Scenario::TraceBound,
                })
            }
        }
    }

    fn checks(&self) -> &'static str {
        match self {
            Plan::Solve { .. } => "integrated-equation residual;cross-solver agreement",
            Plan::Boundary { .. } => "bounded boundary feedback solve;perturbed generator spectrum",
            Plan::Bergman { .. } => "Bergman norm on a sector",
            Plan::Lemma4 { .. } => "Bergman-to-Lp embedding grid",
            Plan::Exponents { .. } => "embedding exponent selection",
            Plan::Admissibility { .. } => "observation admissibility constant",
            Plan::Ensemble { trace_only: false, .. } => "maximal regularity ratio;contraction condition",
            Plan::Ensemble { trace_only: true, .. } => "history trace bound",
        }
    }

    fn empty_output(&self) -> Output {
        Output::new(match self {
            Plan::Solve { .. } => &["t", "norm_z", "norm_Az", "norm_w", "residual"],
            Plan::Boundary { .. } => &["t", "norm_z", "norm_Amz", "boundary_values"],
            Plan::Bergman { .. } => &["kernel", "q", "theta", "norm", "quad_error_estimate"],
            Plan::Lemma4 { .. } => &["q", "s", "theta", "alpha", "R", "C_R", "lhs", "rhs", "satisfied"],
            Plan::Exponents { .. } => &["q", "l", "s", "p", "case", "admissible"],
            Plan::Admissibility { .. } => &["p", "window", "operator", "gamma_hat", "attaining_direction", "samples"],
            Plan::Ensemble { trace_only: false, .. } => &[
                "sample",
                "seed",
                "p",
                "T",
                "norm_zdot",
                "norm_Az",
                "norm_z",
                "norm_f",
                "ratio",
            ],
            Plan::Ensemble { trace_only: true, .. } => &["sample", "seed", "T", "lhs", "rhs", "holds"],
        })
    }

    fn execute(&self, out: &mut Output) -> Result<(), HarnessError> {
        match self {
            Plan::Solve { template, solver } => run_solve(template, *solver, out),
            Plan::Boundary { sys } => run_boundary(sys, out),
            Plan::Bergman { kernels, spec, tol } => {
                for k in kernels {
                    let n = bergman_norm_with_tol(k, *spec, *tol).map_err(HarnessError::numerical)?;
                    out.table.push(vec![
                        k.to_string(),
                        fmt_f64(spec.q()),
                        fmt_f64(spec.theta()),
                        fmt_f64(n.norm),
                        fmt_f64(n.error_estimate),
                    ]);
                }
                Ok(())
            }
            Plan::Lemma4 {
                kernels,
                params,
                radii,
                tol,
            } => run_lemma4(kernels, params, radii, *tol, out),
            Plan::Exponents { pairs } => {
                let mut failures = 0usize;
                for &(q, l) in pairs {
                    let case = ExponentCase::classify(q, l);
                    let row = match choose_exponent(q, l) {
                        Ok(c) => {
                            let ok = c.s > 1.0 && c.s < 2.0 && c.p > 1.0 && c.p <= l;
                            failures += usize::from(!ok);
                            vec![
                                fmt_f64(c.s),
                                fmt_f64(c.p),
                                c.case.label().to_string(),
                                u8::from(ok).to_string(),
                            ]
                        }
                        Err(_) => {
                            failures += 1;
                            vec!["nan".into(), "nan".into(), case.label().to_string(), "0".into()]
                        }
                    };
                    out.table.push([vec![fmt_f64(q), fmt_f64(l)], row].concat());
                }
                out.meta("inadmissible", failures);
                Ok(())
            }
            Plan::Admissibility {
                op,
                obs,
                p,
                windows,
                probes,
            } => {
                for &w in windows {
                    let r =
                        regularity::admissibility_constant(op, obs, *p, w, *probes).map_err(HarnessError::numerical)?;
                    let dir = r
                        .attaining_direction
                        .as_slice()
                        .iter()
                        .map(|v| fmt_f64(*v))
                        .collect::<Vec<_>>()
                        .join(";");
                    out.table.push(vec![
                        fmt_f64(r.p),
                        fmt_f64(r.window),
                        r.operator,
                        fmt_f64(r.gamma_hat),
                        dir,
                        r.samples.to_string(),
                    ]);
                }
                Ok(())
            }
            Plan::Ensemble {
                template,
                p,
                q,
                ensemble,
                seed,
                trace_only,
            } => run_ensemble(template, *p, *q, *ensemble, *seed, *trace_only, out),
        }
    }
}

fn trajectory_table(prob: &VolterraProblem, traj: &Trajectory) -> Result<Table, HarnessError> {
    let res = residual_profile(prob, traj).map_err(HarnessError::numerical)?;
    let mut t = Table::new(&["t", "norm_z", "norm_Az", "norm_w", "residual"]);
    for (j, r) in res.iter().enumerate() {
        t.push(vec![
            fmt_f64(traj.time(j)),
            fmt_f64(traj.z[j].norm()),
            fmt_f64(traj.az[j].norm()),
            fmt_f64(traj.w[j].norm()),
            fmt_f64(*r),
        ]);
    }
    Ok(t)
}

fn run_solve(prob: &VolterraProblem, solver: SolverChoice, out: &mut Output) -> Result<(), HarnessError> {
    let first = match solver {
        SolverChoice::Cq => solve_cq(prob),
        _ => solve_augmented(prob),
    }
    .map_err(HarnessError::numerical)?;
    out.table = trajectory_table(prob, &first)?;
    out.meta("solver", if solver == SolverChoice::Cq { "cq" } else { "aug" });
    out.meta(
        "max_residual",
        fmt_f64(
            out.table
                .rows
                .iter()
                .map(|r| r[4].parse::<f64>().unwrap_or(f64::NAN))
                .fold(0.0, f64::max),
        ),
    );
    if solver == SolverChoice::Both {
        let cq = solve_cq(prob).map_err(HarnessError::numerical)?;
        out.extra.push(("cq", trajectory_table(prob, &cq)?));
        out.meta("max_discrepancy", fmt_f64(first.max_distance(&cq)));
    }
    Ok(())
}

fn run_boundary(sys: &BoundarySystem, out: &mut Output) -> Result<(), HarnessError> {
    let sol = solve_boundary_volterra(sys).map_err(HarnessError::numerical)?;
    let traj = &sol.trajectory;
    for j in 0..traj.len() {
        let [u0, u1] = sol.boundary_values[j];
        out.table.push(vec![
            fmt_f64(traj.time(j)),
            fmt_f64(traj.z[j].norm()),
            fmt_f64(traj.az[j].norm()),
            format!("{};{}", fmt_f64(u0), fmt_f64(u1)),
        ]);
    }
    let dt = traj.dt;
    let norm = |x: &[StateVector]| lp_time_norm(x, 2.0, dt).map_err(HarnessError::numerical);
    let fs: Vec<StateVector> = sys.forcing.grid().cloned().collect();
    let (zd, amz, z, f) = (norm(&traj.zdot)?, norm(&traj.az)?, norm(&traj.z)?, norm(&fs)?);
    out.meta("spectral_abscissa", fmt_f64(sol.spectral_abscissa));
    out.meta("stable", u8::from(sol.stable));
    out.meta("knorm", fmt_f64(sys.feedback.norm()));
    out.meta("norm_zdot", fmt_f64(zd));
    out.meta("norm_Amz", fmt_f64(amz));
    out.meta("norm_z", fmt_f64(z));
    out.meta("norm_f", fmt_f64(f));
    if f > 0.0 {
        out.meta("ratio", fmt_f64((zd + amz + z) / f));
    }
    Ok(())
}

fn run_lemma4(
    kernels: &[MemoryKernel],
    params: &EmbeddingParams,
    radii: &[f64],
    tol: f64,
    out: &mut Output,
) -> Result<(), HarnessError> {
    let mut all = true;
    for k in kernels {
        for &r in radii {
            let c = check_embedding(k, params, r, tol).map_err(HarnessError::numerical)?;
            all &= c.satisfied;
            out.table.push(vec![
                fmt_f64(params.q()),
                fmt_f64(params.s()),
                fmt_f64(params.theta()),
                fmt_f64(params.alpha()),
                fmt_f64(r),
                fmt_f64(c.c_r),
                fmt_f64(c.lhs),
                fmt_f64(c.rhs),
                u8::from(c.satisfied).to_string(),
            ]);
        }
    }
    let halving = radii
        .iter()
        .all(|&r| params.constant(r / 2.0).c_r < params.constant(r).c_r);
    out.meta(
        "row_order",
        format!(
            "kernel-major: {}",
            kernels.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ")
        ),
    );
    out.meta("all_satisfied", u8::from(all));
    out.meta("constant_decreases_under_halving", u8::from(halving));
    Ok(())
}

fn run_ensemble(
    template: &MaxRegTemplate,
    p: f64,
    q: f64,
    ensemble: usize,
    seed: u64,
    trace_only: bool,
    out: &mut Output,
) -> Result<(), HarnessError> {
    let horizon = template.horizon();
    let contraction = if trace_only {
        None
    } else {
        Some(
            contraction_bound(
                &template.op,
                template.alpha,
                &template.kernel,
                p,
                horizon,
                q,
                template.theta,
            )
            .map_err(HarnessError::numerical)?,
        )
    };
    let mut good = Vec::with_capacity(ensemble);
    let mut failure = None;
    for (i, r) in ensemble_samples(template, p, q, ensemble, seed).into_iter().enumerate() {
        match r {
            Ok(s) => {
                let row = if trace_only {
                    vec![
                        i.to_string(),
                        s.seed.to_string(),
                        fmt_f64(horizon),
                        fmt_f64(s.trace.lhs),
                        fmt_f64(s.trace.rhs),
                        u8::from(s.trace.holds()).to_string(),
                    ]
                } else {
                    vec![
                        i.to_string(),
                        s.seed.to_string(),
                        fmt_f64(p),
                        fmt_f64(horizon),
                        fmt_f64(s.zdot),
                        fmt_f64(s.az),
                        fmt_f64(s.z),
                        fmt_f64(s.f),
                        s.ratio.map_or("nan".to_string(), fmt_f64),
                    ]
                };
                out.table.push(row);
                good.push(s);
            }
            Err(e) => {
                failure = Some(HarnessError::numerical(e));
                break;
            }
        }
    }
    let all_hold = good.iter().all(|s| s.trace.holds());
    out.meta("trace_bound_holds", u8::from(all_hold));
    if let Some(c) = contraction {
        let report = regularity::summarize(p, horizon, good, c);
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), fmt_f64);
        out.meta("max_ratio", opt(report.max_ratio));
        out.meta("mean_ratio", opt(report.mean_ratio));
        out.meta("max_ratio_first_half", opt(report.prefix_max(ensemble / 2)));
        out.meta("beta_t", fmt_f64(c.beta_t));
        out.meta("contracts", u8::from(c.contracts));
        out.meta("ratio_bound", opt(c.ratio_bound));
        out.meta("gamma_t", fmt_f64(c.gamma_t));
        out.meta("c_t", fmt_f64(c.c_t));
        out.meta("kernel_norm", fmt_f64(c.kernel_norm));
        out.meta("kappa0", fmt_f64(c.kappa0));
        out.meta("q", fmt_f64(c.q));
        out.meta("s", fmt_f64(c.s));
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
