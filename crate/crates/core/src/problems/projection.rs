//! Euclidean projections used as the proximal maps of the indicator terms.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{ensure_finite, Error, Result};

/// Projection onto `{X ≥ 0, ‖X_i‖₀ ≤ s for every column i}`.
///
/// Each column is clipped at zero and only its `s` largest entries are kept.
/// Equal magnitudes are resolved in favour of the lowest row index.
pub fn prox_snmf_x(v: ArrayView2<f64>, s: usize) -> Result<Array2<f64>> {
    let rows = v.nrows();
    if s == 0 || s > rows {
        return Err(Error::InvalidParameter(format!("sparsity budget {s} outside 1..={rows}")));
    }
    ensure_finite(v.iter(), "sparse projection input")?;
    let mut out = v.mapv(|t| t.max(0.0));
    if s == rows {
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..rows).collect();
    for mut col in out.axis_iter_mut(Axis(1)) {
        order.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
        for &i in &order[s..] {
            col[i] = 0.0;
        }
    }
    Ok(out)
}

/// Projection onto the nonnegative orthant.
pub fn prox_snmf_y(v: ArrayView1<f64>) -> Array1<f64> {
    v.mapv(|t| t.max(0.0))
}

/// Projection onto the box `[0, 1]`.
pub fn prox_bid_x(v: ArrayView1<f64>) -> Array1<f64> {
    v.mapv(|t| t.clamp(0.0, 1.0))
}

const SUM_TOL: f64 = 1e-12;

/// Projection onto `{0 ≤ Y ≤ 1, ‖Y‖₁ ≤ 1}`.
///
/// If the box projection already has unit mass or less it is optimal.
/// Otherwise the answer is `clamp(V − τ, 0, 1)` with `τ > 0` found by
/// bisection so that the entries sum to one.
pub fn prox_bid_y(v: ArrayView1<f64>) -> Result<Array1<f64>> {
    ensure_finite(v.iter(), "kernel projection input")?;
    let clamped = prox_bid_x(v);
    if clamped.sum() <= 1.0 {
        return Ok(clamped);
    }
    let mass = |tau: f64| v.iter().map(|&t| (t - tau).clamp(0.0, 1.0)).sum::<f64>();
    // mass(0) > 1 and mass(max v) = 0
    let mut lo = 0.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mass(mid);
        if (m - 1.0).abs() <= SUM_TOL {
            return Ok(v.mapv(|t| (t - mid).clamp(0.0, 1.0)));
        }
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    // interval collapsed: the upper end is feasible
    let tau = hi;
    if mass(tau) <= 1.0 + 1e-9 {
        Ok(v.mapv(|t| (t - tau).clamp(0.0, 1.0)))
    } else {
        Err(Error::NoConvergence { what: "kernel projection bisection", last_estimate: tau })
    }
}
