//! One-dimensional quadrature: globally adaptive Gauss–Legendre on finite
//! intervals, adaptive Simpson, and composite Simpson on uniform samples.
//!
//! Unbounded ranges are never handled here; callers truncate and add their
//! own analytic tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}, requested {requested:e}")]
    NotConverged { value: f64, error: f64, requested: f64 },
    #[error("non-finite integrand value at x = {x}")]
    NonFinite { x: f64 },
    #[error("composite rule needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Conservative estimate: the discrepancy between the coarse rule and the
    /// bisected rule on every leaf, summed.
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

const GL_ORDER: usize = 10;

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Fixed-order Gauss–Legendre on [a, b].
pub fn gauss_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(w).map(|(&xi, &wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

struct Leaf {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl Leaf {
    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Leaf {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Leaf {}
impl PartialOrd for Leaf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Leaf {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn make_leaf<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Leaf {
    let m = 0.5 * (a + b);
    let left = gauss_fixed(f, a, m);
    let right = gauss_fixed(f, m, b);
    Leaf {
        a,
        b,
        left,
        right,
        err: (whole - left - right).abs(),
    }
}

/// Globally adaptive bisection with a 10-point Gauss–Legendre rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult, QuadError> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            intervals: 0,
        });
    }
    let whole = gauss_fixed(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(make_leaf(&f, a, b, whole));
    let mut evaluations = 3 * GL_ORDER;
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), l| (v + l.value(), e + l.err));
        if !value.is_finite() || !error.is_finite() {
            let x = heap.peek().map(|l| 0.5 * (l.a + l.b)).unwrap_or(a);
            return Err(QuadError::NonFinite { x });
        }
        let requested = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= requested {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
                intervals: heap.len(),
            });
        }
        if heap.len() >= opts.max_intervals {
            return Err(QuadError::NotConverged {
                value,
                error,
                requested,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // interval cannot be bisected further in floating point
            return Err(QuadError::NotConverged {
                value,
                error,
                requested,
            });
        }
        heap.push(make_leaf(&f, worst.a, m, worst.left));
        heap.push(make_leaf(&f, m, worst.b, worst.right));
        evaluations += 4 * GL_ORDER;
    }
}

/// Adaptive Simpson with Richardson correction; `tol` is absolute.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64, QuadError> {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, QuadError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if !delta.is_finite() {
            return Err(QuadError::NonFinite { x: m });
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(QuadError::NotConverged {
                value: left + right,
                error: delta.abs(),
                requested: tol,
            });
        }
        Ok(step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    if b < a || !a.is_finite() || !b.is_finite() {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Composite Simpson on uniformly spaced samples; an odd number of intervals
/// closes with the 3/8 rule on the last three.
pub fn simpson_uniform(values: &[f64], h: f64) -> Result<f64, QuadError> {
    let n = values.len();
    if n < 3 {
        return Err(QuadError::TooFewSamples(n));
    }
    let intervals = n - 1;
    let even_end = if intervals.is_multiple_of(2) { n - 1 } else { n - 4 };
    let mut sum = simpson_prefix(values, even_end, h);
    if intervals % 2 == 1 {
        sum += three_eighths(&values[even_end..], h);
    }
    Ok(sum)
}

fn simpson_prefix(values: &[f64], end: usize, h: f64) -> f64 {
    // `end` is an even index
    let mut acc = 0.0;
    let mut j = 0;
    while j + 2 <= end {
        acc += values[j] + 4.0 * values[j + 1] + values[j + 2];
        j += 2;
    }
    acc * h / 3.0
}

fn three_eighths(v: &[f64], h: f64) -> f64 {
    3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3])
}

/// Running integral `I_j = ∫_0^{t_j}` of uniformly sampled data, fourth order
/// at every index.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Result<Vec<f64>, QuadError> {
    let n = values.len();
    if n < 3 {
        return Err(QuadError::TooFewSamples(n));
    }
    let mut even = vec![0.0; n];
    let mut j = 2;
    while j < n {
        even[j] = even[j - 2] + h / 3.0 * (values[j - 2] + 4.0 * values[j - 1] + values[j]);
        j += 2;
    }
    let mut out = vec![0.0; n];
    for j in 1..n {
        out[j] = if j % 2 == 0 {
            even[j]
        } else if j == 1 {
            h / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2])
        } else {
            even[j - 3] + three_eighths(&values[j - 3..=j], h)
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        // degree 18 monomial: ∫ x^18 = 2/19
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(v, 2.0 / 19.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_sharp_layers() {
        let lam = 1e4;
        let r = integrate(|t| (-lam * t).exp(), 0.0, 10.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, 1.0 / lam, max_relative = 1e-10);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_intervals: 3,
        };
        let err = integrate(|t: f64| t.sqrt(), 0.0, 1.0, opts);
        assert!(matches!(err, Err(QuadError::NotConverged { .. })));
    }

    #[test]
    fn simpson_odd_and_even_interval_counts() {
        for n in [3usize, 4, 5, 50, 51] {
            let h = 1.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|j| (j as f64 * h).powi(3)).collect();
            assert_relative_eq!(simpson_uniform(&v, h).unwrap(), 0.25, epsilon = 1e-14);
        }
        assert_eq!(simpson_uniform(&[1.0, 2.0], 1.0), Err(QuadError::TooFewSamples(2)));
    }

    #[test]
    fn cumulative_matches_cubic_antiderivative() {
        let n = 21;
        let h = 0.05;
        let v: Vec<f64> = (0..n).map(|j| (j as f64 * h).powi(3)).collect();
        let c = cumulative_simpson(&v, h).unwrap();
        for (j, cj) in c.iter().enumerate().skip(2) {
            let t = j as f64 * h;
            assert_relative_eq!(*cj, t.powi(4) / 4.0, epsilon = 1e-14);
        }
        // the opening step is exact for quadratics only
        assert!((c[1] - h.powi(4) / 4.0).abs() < h.powi(4));
        let sq: Vec<f64> = (0..n).map(|j| (j as f64 * h).powi(2)).collect();
        let c = cumulative_simpson(&sq, h).unwrap();
        assert_relative_eq!(c[1], h.powi(3) / 3.0, epsilon = 1e-16);
    }

    #[test]
    fn adaptive_simpson_exponential() {
        let v = adaptive_simpson(|t: f64| (-3.0 * t).exp(), 0.0, 2.0, 1e-12, 40).unwrap();
        assert_relative_eq!(v, (1.0 - (-6.0f64).exp()) / 3.0, epsilon = 1e-11);
    }
}
