//! Power iteration for the largest eigenvalue of a symmetric PSD operator.

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-6;
pub const POWER_MAX_ITER: usize = 500;

/// Largest eigenvalue of the symmetric positive semidefinite operator
/// `apply(v, out)` on `R^dim`. Stops once the eigen-residual
/// `‖Av − λv‖` falls below `tol · λ`.
pub fn power_iteration(
    dim: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if dim == 0 {
        return Ok(0.0);
    }
    // fixed, generic start vector
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618).sin()).collect();
    normalize(&mut v);
    let mut w = vec![0.0; dim];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        apply(&v, &mut w);
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if !norm.is_finite() {
            return Err(Error::NoConvergence { what: "power iteration", last_estimate: lambda });
        }
        let resid = v.iter().zip(&w).map(|(a, b)| (b - rayleigh * a).powi(2)).sum::<f64>().sqrt();
        let converged = resid <= tol * rayleigh.abs();
        lambda = rayleigh;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if converged {
            return Ok(lambda);
        }
    }
    Err(Error::NoConvergence { what: "power iteration", last_estimate: lambda })
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    v.iter_mut().for_each(|t| *t /= n);
}

/// `λ_max(G)` for a dense symmetric matrix stored row-major.
pub fn lambda_max_dense(g: &[f64], dim: usize) -> Result<f64> {
    power_iteration(
        dim,
        |v, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = g[i * dim..(i + 1) * dim].iter().zip(v).map(|(a, b)| a * b).sum();
            }
        },
        POWER_TOL,
        POWER_MAX_ITER,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator() {
        let g = [4.0, 0.0, 0.0, 1.0];
        assert!((lambda_max_dense(&g, 2).unwrap() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn zero_operator() {
        assert_eq!(power_iteration(3, |_, o| o.fill(0.0), 1e-6, 10).unwrap(), 0.0);
    }

    #[test]
    fn non_convergence_reports_last_estimate() {
        let err = power_iteration(
            2,
            |v, o| {
                o[0] = 3.0 * v[0];
                o[1] = v[1];
            },
            1e-12,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}
