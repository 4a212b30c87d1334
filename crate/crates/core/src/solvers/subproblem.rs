//! Block subproblems
//! `argmin f(x) + ⟨x, d⟩ + D_φ(x, x_k) + a1⟨x, x_{k−1} − x_k⟩ + a2⟨x, x_{k−2} − x_{k−1}⟩`.

use ndarray::{Array1, ArrayView1};

use crate::error::{ensure_finite, ensure_same_len, Result};
use crate::kernel::{BregmanKernel, KernelKind};
use crate::point::IterateWindow;
use crate::problems::Problem;

/// Shared solver for one block; `prox` is the projection onto the block's
/// constraint set, called with step `1/θ`.
pub fn solve_block(
    prox: impl FnOnce(ArrayView1<f64>, f64) -> Result<Array1<f64>>,
    d: ArrayView1<f64>,
    current: ArrayView1<f64>,
    prev: ArrayView1<f64>,
    prev2: ArrayView1<f64>,
    kernel: &BregmanKernel,
    a1: f64,
    a2: f64,
) -> Result<Array1<f64>> {
    ensure_same_len(current.len(), d.len(), "subproblem gradient")?;
    ensure_finite(d.iter(), "subproblem gradient")?;
    // linear part of the objective: d + a1 (x_{k-1} − x_k) + a2 (x_{k-2} − x_{k-1})
    let mut lin = d.to_owned();
    if a1 != 0.0 {
        lin.scaled_add(a1, &(&prev - &current));
    }
    if a2 != 0.0 {
        lin.scaled_add(a2, &(&prev2 - &prev));
    }
    let theta = kernel.scale();
    match kernel.kind() {
        KernelKind::Quadratic => {
            let mut v = current.to_owned();
            v.scaled_add(-1.0 / theta, &lin);
            prox(v.view(), 1.0 / theta)
        }
        KernelKind::Quartic => {
            // ∇φ(x) = ∇φ(x_k) − lin, solved radially, then projected
            let w = kernel.gradient(current)? - &lin;
            let x = kernel.inverse_gradient(w.view());
            prox(x.view(), 1.0 / theta)
        }
    }
}

/// The x-block update with gradient estimate `d`.
pub fn solve_x_subproblem(
    problem: &dyn Problem,
    d: ArrayView1<f64>,
    window: &IterateWindow,
    kernel_x: &BregmanKernel,
    a1: f64,
    a2: f64,
) -> Result<Array1<f64>> {
    solve_block(
        |v, s| problem.prox_f(v, s),
        d,
        window.get(0).x.view(),
        window.get(1).x.view(),
        window.get(2).x.view(),
        kernel_x,
        a1,
        a2,
    )
}

/// The y-block update with gradient estimate `d`.
pub fn solve_y_subproblem(
    problem: &dyn Problem,
    d: ArrayView1<f64>,
    window: &IterateWindow,
    kernel_y: &BregmanKernel,
    b1: f64,
    b2: f64,
) -> Result<Array1<f64>> {
    solve_block(
        |v, s| problem.prox_g(v, s),
        d,
        window.get(0).y.view(),
        window.get(1).y.view(),
        window.get(2).y.view(),
        kernel_y,
        b1,
        b2,
    )
}
