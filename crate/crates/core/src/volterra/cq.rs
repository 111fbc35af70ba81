use rayon::prelude::*;

use super::{Trajectory, VolterraError, VolterraProblem};
use crate::kernels::MemoryKernel;
use crate::quadrature::gauss_legendre;

/// `φ1(x) = (e^x - 1)/x` and `φ2(x) = (e^x - 1 - x)/x²`.
pub(crate) fn phi12(x: f64) -> (f64, f64) {
    if x.abs() < 0.1 {
        // φ1 = Σ x^k/(k+1)!, φ2 = Σ x^k/(k+2)!
        let (mut p1, mut p2) = (0.0, 0.0);
        let mut term = 1.0; // x^k/k!
        for k in 0..12 {
            p1 += term / (k + 1) as f64;
            p2 += term / ((k + 1) * (k + 2)) as f64;
            term *= x / (k + 1) as f64;
        }
        (p1, p2)
    } else {
        let em1 = x.exp_m1();
        (em1 / x, (em1 - x) / (x * x))
    }
}

/// Product-trapezoidal weights for `∫ a(u) g(t-u) du` with `g` piecewise
/// linear: `wa[L] = ∫_{(L-1)h}^{Lh} a(u)(u-(L-1)h)/h du` and
/// `wb[L] = ∫_{(L-1)h}^{Lh} a(u)(Lh-u)/h du` for `L = 1..=n`; index 0 unused.
pub(crate) fn product_weights(kernel: &MemoryKernel, h: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(8);
    let mut wa = vec![0.0; n + 1];
    let mut wb = vec![0.0; n + 1];
    for l in 1..=n {
        let lo = (l - 1) as f64 * h;
        let (mut sa, mut sb) = (0.0, 0.0);
        for (xi, wi) in x.iter().zip(&w) {
            let r = 0.5 * (xi + 1.0);
            let a = kernel.eval_real(lo + r * h);
            sa += wi * a * r;
            sb += wi * a * (1.0 - r);
        }
        wa[l] = 0.5 * h * sa;
        wb[l] = 0.5 * h * sb;
    }
    (wa, wb)
}

/// Convolution-quadrature solver: the memory integral uses product-trapezoidal
/// weights on the piecewise-linear interpolant of `z`, the stiff part
/// `-λ_k z_k` is integrated exactly, and `w + f` is interpolated linearly
/// across each step (exponential time differencing). Cost is `O(M²)` per mode.
pub fn solve_cq(prob: &VolterraProblem) -> Result<Trajectory, VolterraError> {
    let h = prob.dt();
    let steps = prob.steps();
    let lam = prob.op().eigenvalues();
    let frac = prob.fractional_weights();
    let forcing = prob.forcing();
    let (wa, wb) = product_weights(prob.kernel(), h, steps + 1);
    // history weight on z_{n+1-L}, L = 1..=steps
    let hist: Vec<f64> = (0..=steps)
        .map(|l| if l == 0 { 0.0 } else { wa[l] + wb[l + 1] })
        .collect();

    let per_mode: Vec<(Vec<f64>, Vec<f64>)> = (0..lam.len())
        .into_par_iter()
        .map(|k| {
            let (l, fr) = (lam[k], frac[k]);
            let decay = (-l * h).exp();
            let (p1, p2) = phi12(-l * h);
            let denom = 1.0 - h * p2 * fr * wb[1];
            if !(denom >= 0.5) {
                return Err(VolterraError::StepTooLarge { mode: k, factor: denom });
            }
            let mut z = vec![0.0; steps + 1];
            let mut w = vec![0.0; steps + 1];
            for n in 0..steps {
                let tail: f64 = hist[1..=n]
                    .iter()
                    .zip(z[1..=n].iter().rev())
                    .map(|(c, zz)| c * zz)
                    .sum();
                let (fn0, fn1) = (forcing.at_grid(n)[k], forcing.at_grid(n + 1)[k]);
                let rhs = decay * z[n] + h * (p1 - p2) * (w[n] + fn0) + h * p2 * (fr * tail + fn1);
                z[n + 1] = rhs / denom;
                w[n + 1] = fr * (wb[1] * z[n + 1] + tail);
            }
            Ok((z, w))
        })
        .collect::<Result<_, VolterraError>>()?;
    let (z, w): (Vec<_>, Vec<_>) = per_mode.into_iter().unzip();
    Ok(Trajectory::from_modes(prob.op(), forcing, &z, &w))
}
