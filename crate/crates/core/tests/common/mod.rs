//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use statrs::function::gamma::gamma;
use volterra_mr::kernels::MemoryKernel;
use volterra_mr::spectral::{SpectralOperator, StateVector};
use volterra_mr::volterra::{Forcing, Trajectory, VolterraProblem};

/// Composite Simpson on `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Simpson on `values[0..=n]` with a 3/8 closing panel when `n` is odd.
pub fn simpson_samples(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let even = if n.is_multiple_of(2) { n } else { n - 3 };
            let mut s = 0.0;
            for i in (0..even).step_by(2) {
                s += values[i] + 4.0 * values[i + 1] + values[i + 2];
            }
            s *= h / 3.0;
            if even < n {
                let v = &values[even..];
                s += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            s
        }
    }
}

/// `‖βz^m e^{-γz}‖_{B^q_θ}` in polar form: the radial integral is
/// `Γ(mq+2)/(qγ cosφ)^{mq+2}`, leaving a smooth angular integral.
pub fn sector_norm_oracle(kernel: &MemoryKernel, q: f64, theta: f64) -> f64 {
    let (b, g, m) = (kernel.beta(), kernel.gamma(), kernel.degree() as f64);
    let e = m * q + 2.0;
    let radial = gamma(e) / (q * g).powf(e);
    let angular = simpson(|phi| phi.cos().powf(-e), -theta, theta, 20_000);
    b * (radial * angular).powf(1.0 / q)
}

/// `(∫_0^R |a|^p)^{1/p}`: closed form for `m = 0`, fine Simpson otherwise.
pub fn kernel_lp_oracle(kernel: &MemoryKernel, p: f64, r: f64) -> f64 {
    let (b, g) = (kernel.beta(), kernel.gamma());
    if kernel.degree() == 0 {
        return b * (-(-p * g * r).exp_m1() / (p * g)).powf(1.0 / p);
    }
    simpson(|t| kernel.eval_real(t).abs().powf(p), 0.0, r, 200_000).powf(1.0 / p)
}

/// `w(t_n) = λ^α ∫_0^{t_n} a(t_n - s) z(s) ds` by Simpson on the stored
/// grid, at the grid indices in `at`.
pub fn memory_trace_oracle(prob: &VolterraProblem, traj: &Trajectory, at: &[usize]) -> Vec<StateVector> {
    let lam = prob.op().eigenvalues();
    let h = traj.dt;
    let k = prob.kernel();
    at.iter()
        .map(|&n| {
            let t = traj.time(n);
            let coeffs = (0..lam.len())
                .map(|m| {
                    let vals: Vec<f64> = (0..=n).map(|j| k.eval_real(t - traj.time(j)) * traj.z[j][m]).collect();
                    lam[m].powf(prob.alpha()) * simpson_samples(&vals, h)
                })
                .collect();
            StateVector::new(coeffs)
        })
        .collect()
}

/// The boundary-feedback system integrated by classical RK4 on `substeps`
/// substeps per cell, with the coupled generator assembled from scratch:
/// `ż_k = -λ_k z_k + √2kπ(u_0 - (-1)^k u_1) + w_k + f_k`, `u = Kz`,
/// `ẇ = βΛ^α z - γw`.
pub fn boundary_rk4_oracle(
    op: &SpectralOperator,
    alpha: f64,
    kernel: &MemoryKernel,
    k0: &StateVector,
    k1: &StateVector,
    forcing: &Forcing,
    substeps: usize,
) -> Vec<(StateVector, StateVector)> {
    let n = op.modes();
    let lam = op.eigenvalues().to_vec();
    let (beta, gam) = (kernel.beta(), kernel.gamma());
    let flux: Vec<(f64, f64)> = (1..=n)
        .map(|k| {
            let c = 2f64.sqrt() * k as f64 * std::f64::consts::PI;
            (c, if k % 2 == 0 { c } else { -c })
        })
        .collect();
    let rhs = |z: &[f64], w: &[f64], f: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let u0: f64 = z.iter().zip(k0.as_slice()).map(|(a, b)| a * b).sum();
        let u1: f64 = z.iter().zip(k1.as_slice()).map(|(a, b)| a * b).sum();
        let dz = (0..n)
            .map(|i| -lam[i] * z[i] + flux[i].0 * u0 - flux[i].1 * u1 + w[i] + f[i])
            .collect();
        let dw = (0..n).map(|i| beta * lam[i].powf(alpha) * z[i] - gam * w[i]).collect();
        (dz, dw)
    };
    let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + a * q).collect() };
    let h = forcing.dt() / substeps as f64;
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut out = vec![(StateVector::new(z.clone()), StateVector::new(w.clone()))];
    for j in 0..forcing.steps() {
        let f = forcing.at_mid(j).as_slice().to_vec();
        for _ in 0..substeps {
            let (a1, b1) = rhs(&z, &w, &f);
            let (a2, b2) = rhs(&axpy(&z, h / 2.0, &a1), &axpy(&w, h / 2.0, &b1), &f);
            let (a3, b3) = rhs(&axpy(&z, h / 2.0, &a2), &axpy(&w, h / 2.0, &b2), &f);
            let (a4, b4) = rhs(&axpy(&z, h, &a3), &axpy(&w, h, &b3), &f);
            for i in 0..n {
                z[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
                w[i] += h / 6.0 * (b1[i] + 2.0 * b2[i] + 2.0 * b3[i] + b4[i]);
            }
        }
        out.push((StateVector::new(z.clone()), StateVector::new(w.clone())));
    }
    out
}

pub fn max_norm(states: &[StateVector]) -> f64 {
    states.iter().map(StateVector::norm).fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
