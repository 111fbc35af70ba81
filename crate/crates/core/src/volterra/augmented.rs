use nalgebra::{Matrix2, Matrix3, Vector2};
use rayon::prelude::*;

use super::{Trajectory, VolterraError, VolterraProblem};

/// Exact one-step propagator of `x' = Mx + (f, 0)` with `f` frozen:
/// returns `(e^{Mh}, ∫_0^h e^{Ms} ds · e_1)`.
pub(crate) fn mode_propagator(m: Matrix2<f64>, h: f64) -> (Matrix2<f64>, Vector2<f64>) {
    #[rustfmt::skip]
    let block = Matrix3::new(
        m[(0, 0)] * h, m[(0, 1)] * h, h,
        m[(1, 0)] * h, m[(1, 1)] * h, 0.0,
        0.0,           0.0,           0.0,
    );
    let e = block.exp();
    (
        Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]),
        Vector2::new(e[(0, 2)], e[(1, 2)]),
    )
}

/// Steps the history reformulation
/// `ż_k = -λ_k z_k + w_k + f_k`, `ẇ_k = βλ_k^α z_k - γw_k`
/// with the exact per-mode propagator and midpoint forcing.
pub fn solve_augmented(prob: &VolterraProblem) -> Result<Trajectory, VolterraError> {
    let kernel = *prob.kernel();
    if !kernel.is_exponential() {
        return Err(VolterraError::UnsupportedKernel(kernel));
    }
    let (beta, gamma) = (kernel.beta(), kernel.gamma());
    let h = prob.dt();
    let steps = prob.steps();
    let lam = prob.op().eigenvalues();
    let frac = prob.fractional_weights();
    let forcing = prob.forcing();

    let per_mode: Vec<(Vec<f64>, Vec<f64>)> = (0..lam.len())
        .into_par_iter()
        .map(|k| {
            let m = Matrix2::new(-lam[k], 1.0, beta * frac[k], -gamma);
            let (e, g) = mode_propagator(m, h);
            let mut z = Vec::with_capacity(steps + 1);
            let mut w = Vec::with_capacity(steps + 1);
            let mut x = Vector2::zeros();
            z.push(0.0);
            w.push(0.0);
            for j in 0..steps {
                x = e * x + g * forcing.at_mid(j)[k];
                z.push(x[0]);
                w.push(x[1]);
            }
            (z, w)
        })
        .collect();
    let (z, w): (Vec<_>, Vec<_>) = per_mode.into_iter().unzip();
    Ok(Trajectory::from_modes(prob.op(), forcing, &z, &w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::MemoryKernel;
    use crate::spectral::{SpectralOperator, StateVector};
    use crate::volterra::Forcing;
    use approx::assert_relative_eq;

    #[test]
    fn propagator_of_scalar_decay() {
        let (e, g) = mode_propagator(Matrix2::new(-2.0, 0.0, 0.0, -1.0), 0.5);
        assert_relative_eq!(e[(0, 0)], (-1.0f64).exp(), max_relative = 1e-13);
        assert_relative_eq!(g[0], (1.0 - (-1.0f64).exp()) / 2.0, max_relative = 1e-13);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn memoryless_reduction() {
        let op = SpectralOperator::dirichlet(3).unwrap();
        let l1 = op.eigenvalues()[0];
        let f = Forcing::constant(StateVector::basis(3, 0), 1e-3, 500);
        let prob = VolterraProblem::new(op, 0.5, MemoryKernel::exponential(0.0, 1.0).unwrap(), f).unwrap();
        let traj = solve_augmented(&prob).unwrap();
        for (j, z) in traj.z.iter().enumerate() {
            let t = traj.time(j);
            assert_relative_eq!(z[0], -(-l1 * t).exp_m1() / l1, epsilon = 1e-12);
            assert_eq!(z[1], 0.0);
        }
    }

    #[test]
    fn rejects_monomial_kernel() {
        let op = SpectralOperator::dirichlet(2).unwrap();
        let k = MemoryKernel::monomial_exponential(1.0, 1.0, 1).unwrap();
        let prob = VolterraProblem::new(op, 0.5, k, Forcing::zero(2, 0.1, 4)).unwrap();
        assert!(matches!(
            solve_augmented(&prob),
            Err(VolterraError::UnsupportedKernel(_))
        ));
    }
}
