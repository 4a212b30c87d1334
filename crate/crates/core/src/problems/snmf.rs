//! Sparse nonnegative matrix factorization
//! `min (η/2)‖A − XY‖²_F  s.t.  X, Y ≥ 0, ‖X_i‖₀ ≤ s` for each column `X_i`.
//!
//! The finite sum runs over the rows of `A`: `H_i(X, Y) = l·(η/2)‖A_i − X_i Y‖²`
//! with `X_i` the `i`-th row of `X`, so that `(1/l) Σ_i H_i = H`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lipschitz::lambda_max_dense;
use super::projection::{prox_snmf_x, prox_snmf_y};
use super::{check_batch, check_point, Block, LipschitzEstimates, Objective, Problem};
use crate::error::{ensure_finite, ensure_same_len, Error, Result};
use crate::point::BlockPoint;

#[derive(Debug, Clone)]
pub struct SnmfConfig {
    /// `l × m` data matrix.
    pub a: Array2<f64>,
    /// Inner rank `r`.
    pub rank: usize,
    /// Nonzeros allowed per column of `X`.
    pub sparsity: usize,
    pub eta_fit: f64,
}

impl SnmfConfig {
    /// Sparsity budget from a fraction of nonzeros per column (e.g. `0.25`).
    pub fn sparsity_from_fraction(rows: usize, fraction: f64) -> usize {
        ((fraction * rows as f64).round() as usize).clamp(1, rows.max(1))
    }
}

#[derive(Debug, Clone)]
pub struct Snmf {
    cfg: SnmfConfig,
}

impl Snmf {
    pub fn new(cfg: SnmfConfig) -> Result<Self> {
        let (l, m) = cfg.a.dim();
        if cfg.rank == 0 || cfg.rank > l.min(m) {
            return Err(Error::InvalidParameter(format!("rank {} outside 1..={}", cfg.rank, l.min(m))));
        }
        if cfg.sparsity == 0 || cfg.sparsity > l {
            return Err(Error::InvalidParameter(format!("sparsity {} outside 1..={l}", cfg.sparsity)));
        }
        if !(cfg.eta_fit > 0.0) {
            return Err(Error::InvalidParameter(format!("eta_fit must be positive, got {}", cfg.eta_fit)));
        }
        ensure_finite(cfg.a.iter(), "data matrix")?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SnmfConfig {
        &self.cfg
    }

    pub fn rows(&self) -> usize {
        self.cfg.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.cfg.a.ncols()
    }

    pub fn rank(&self) -> usize {
        self.cfg.rank
    }

    pub fn x_view<'a>(&self, x: ArrayView1<'a, f64>) -> Result<ArrayView2<'a, f64>> {
        ensure_same_len(self.rows() * self.rank(), x.len(), "snmf X")?;
        Ok(x.into_shape((self.rows(), self.rank())).expect("contiguous X block"))
    }

    pub fn y_view<'a>(&self, y: ArrayView1<'a, f64>) -> Result<ArrayView2<'a, f64>> {
        ensure_same_len(self.rank() * self.cols(), y.len(), "snmf Y")?;
        Ok(y.into_shape((self.rank(), self.cols())).expect("contiguous Y block"))
    }

    fn check_dims(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<()> {
        ensure_same_len(self.rows(), x.nrows(), "snmf X rows")?;
        ensure_same_len(self.rank(), x.ncols(), "snmf X cols")?;
        ensure_same_len(self.rank(), y.nrows(), "snmf Y rows")?;
        ensure_same_len(self.cols(), y.ncols(), "snmf Y cols")
    }

    /// `(η/2)‖A − XY‖²_F` and whether `(X, Y)` satisfies the constraints.
    pub fn evaluate(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Objective> {
        self.check_dims(x, y)?;
        let r = &self.cfg.a - &x.dot(&y);
        Ok(Objective {
            value: 0.5 * self.cfg.eta_fit * r.iter().map(|v| v * v).sum::<f64>(),
            feasible: self.feasible_x(x) && y.iter().all(|&v| v >= 0.0),
        })
    }

    fn feasible_x(&self, x: ArrayView2<f64>) -> bool {
        x.iter().all(|&v| v >= 0.0)
            && x.axis_iter(Axis(1)).all(|c| c.iter().filter(|&&v| v != 0.0).count() <= self.cfg.sparsity)
    }

    /// Average of the row-component gradients `(1/|B|) Σ_{i∈B} (∇_X H_i, ∇_Y H_i)`.
    pub fn grad_components(
        &self,
        batch: &[usize],
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_dims(x, y)?;
        check_batch(batch, self.rows())?;
        let w = 1.0 / batch.len() as f64;
        let mut gx = Array2::zeros(x.dim());
        let mut gy = Array2::zeros(y.dim());
        self.accumulate_rows(batch, x, y, w, Some(gx.view_mut()), Some(gy.view_mut()));
        Ok((gx, gy))
    }

    fn accumulate_rows(
        &self,
        batch: &[usize],
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        weight: f64,
        mut gx: Option<ArrayViewMut2<f64>>,
        mut gy: Option<ArrayViewMut2<f64>>,
    ) {
        let scale = weight * self.rows() as f64 * self.cfg.eta_fit;
        let mut resid = Array1::zeros(self.cols());
        for &i in batch {
            let xi = x.row(i);
            // resid = X_i Y − A_i
            resid.assign(&xi.dot(&y));
            resid -= &self.cfg.a.row(i);
            if let Some(gx) = gx.as_mut() {
                let mut row = gx.row_mut(i);
                row.scaled_add(scale, &y.dot(&resid));
            }
            if let Some(gy) = gy.as_mut() {
                for (k, &xik) in xi.iter().enumerate() {
                    if xik != 0.0 {
                        gy.row_mut(k).scaled_add(scale * xik, &resid);
                    }
                }
            }
        }
    }

    fn gram_rows(m: ArrayView2<f64>) -> Vec<f64> {
        // M Mᵀ
        m.dot(&m.t()).iter().cloned().collect()
    }
}

impl Problem for Snmf {
    fn name(&self) -> &'static str {
        "snmf"
    }

    fn x_dim(&self) -> usize {
        self.rows() * self.rank()
    }

    fn y_dim(&self) -> usize {
        self.rank() * self.cols()
    }

    fn n_components(&self) -> usize {
        self.rows()
    }

    fn smooth_value(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        let (xm, ym) = (self.x_view(x).expect("x dim"), self.y_view(y).expect("y dim"));
        let r = &self.cfg.a - &xm.dot(&ym);
        0.5 * self.cfg.eta_fit * r.iter().map(|v| v * v).sum::<f64>()
    }

    fn is_feasible_x(&self, x: ArrayView1<f64>) -> bool {
        self.x_view(x).map(|xm| self.feasible_x(xm)).unwrap_or(false)
    }

    fn is_feasible_y(&self, y: ArrayView1<f64>) -> bool {
        y.len() == self.y_dim() && y.iter().all(|&v| v >= 0.0)
    }

    fn accumulate_grad_x(
        &self,
        batch: &[usize],
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        weight: f64,
        out: &mut Array1<f64>,
    ) -> Result<()> {
        check_point(self, x, y)?;
        check_batch(batch, self.rows())?;
        ensure_same_len(self.x_dim(), out.len(), "snmf grad X buffer")?;
        let (xm, ym) = (self.x_view(x)?, self.y_view(y)?);
        let g = out.view_mut().into_shape((self.rows(), self.rank())).expect("contiguous buffer");
        self.accumulate_rows(batch, xm, ym, weight, Some(g), None);
        Ok(())
    }

    fn accumulate_grad_y(
        &self,
        batch: &[usize],
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        weight: f64,
        out: &mut Array1<f64>,
    ) -> Result<()> {
        check_point(self, x, y)?;
        check_batch(batch, self.rows())?;
        ensure_same_len(self.y_dim(), out.len(), "snmf grad Y buffer")?;
        let (xm, ym) = (self.x_view(x)?, self.y_view(y)?);
        let g = out.view_mut().into_shape((self.rank(), self.cols())).expect("contiguous buffer");
        self.accumulate_rows(batch, xm, ym, weight, None, Some(g));
        Ok(())
    }

    fn prox_f(&self, v: ArrayView1<f64>, _step: f64) -> Result<Array1<f64>> {
        let p = prox_snmf_x(self.x_view(v)?, self.cfg.sparsity)?;
        Ok(Array1::from_iter(p.into_iter()))
    }

    fn prox_g(&self, v: ArrayView1<f64>, _step: f64) -> Result<Array1<f64>> {
        ensure_same_len(self.y_dim(), v.len(), "snmf Y prox")?;
        Ok(prox_snmf_y(v))
    }

    fn partial_lipschitz(&self, block: Block, point: &BlockPoint) -> Result<f64> {
        let eta = self.cfg.eta_fit;
        let r = self.rank();
        match block {
            Block::X => Ok(eta * lambda_max_dense(&Self::gram_rows(self.y_view(point.y.view())?), r)?),
            Block::Y => {
                let xm = self.x_view(point.x.view())?;
                Ok(eta * lambda_max_dense(&Self::gram_rows(xm.t()), r)?)
            }
        }
    }

    fn lipschitz_hint(&self, point: &BlockPoint, per_component: bool) -> Result<LipschitzEstimates> {
        let eta = self.cfg.eta_fit;
        let (xm, ym) = (self.x_view(point.x.view())?, self.y_view(point.y.view())?);
        let lx = self.partial_lipschitz(Block::X, point)?;
        let resid = &self.cfg.a - &xm.dot(&ym);
        let fro = |m: ArrayView2<f64>| m.iter().map(|v| v * v).sum::<f64>();
        if per_component {
            let n = self.rows() as f64;
            let row_max = |m: ArrayView2<f64>| {
                m.axis_iter(Axis(0)).map(|r| r.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max)
            };
            let l = n * lx.max(eta * row_max(xm));
            let m = n * eta * (row_max(xm) + fro(ym) + row_max(resid.view()).sqrt());
            Ok(LipschitzEstimates::new(l, m))
        } else {
            let l = lx.max(self.partial_lipschitz(Block::Y, point)?);
            let m = eta * (fro(xm) + fro(ym) + fro(resid.view()).sqrt());
            Ok(LipschitzEstimates::new(l, m))
        }
    }

    fn initial_point(&self, seed: u64) -> BlockPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, r, m) = (self.rows(), self.rank(), self.cols());
        let x0 = Array2::from_shape_fn((l, r), |_| rng.gen_range(0.0..1.0));
        let mut x0 = prox_snmf_x(x0.view(), self.cfg.sparsity).expect("valid sparsity");
        let mut y0 = Array2::from_shape_fn((r, m), |_| rng.gen_range(0.0..1.0));
        let target = self.cfg.a.mean().unwrap_or(0.0);
        let current = x0.dot(&y0).mean().unwrap_or(0.0);
        if target > 0.0 && current > 0.0 {
            let s = (target / current).sqrt();
            x0 *= s;
            y0 *= s;
        }
        BlockPoint { x: Array1::from_iter(x0.into_iter()), y: Array1::from_iter(y0.into_iter()) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_instance(seed: u64, l: usize, m: usize, r: usize) -> (Snmf, Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((l, m), |_| rng.gen_range(0.0..1.0));
        let x = Array2::from_shape_fn((l, r), |_| rng.gen_range(0.0..1.0));
        let y = Array2::from_shape_fn((r, m), |_| rng.gen_range(0.0..1.0));
        let p = Snmf::new(SnmfConfig { a, rank: r, sparsity: l, eta_fit: 3.0 }).unwrap();
        (p, x, y)
    }

    #[test]
    fn exact_factorization_has_zero_objective() {
        let x = array![[1.0, 0.0], [0.5, 2.0], [0.0, 1.0]];
        let y = array![[1.0, 2.0], [0.0, 1.0]];
        let p = Snmf::new(SnmfConfig { a: x.dot(&y), rank: 2, sparsity: 3, eta_fit: 1.0 }).unwrap();
        let o = p.evaluate(x.view(), y.view()).unwrap();
        assert_eq!(o.value, 0.0);
        assert!(o.feasible);
    }

    #[test]
    fn identity_example() {
        let p = Snmf::new(SnmfConfig { a: Array2::eye(2), rank: 2, sparsity: 2, eta_fit: 2.0 }).unwrap();
        let o = p.evaluate(Array2::eye(2).view(), Array2::zeros((2, 2)).view()).unwrap();
        assert_eq!(o.value, 2.0);
    }

    #[test]
    fn matches_triple_loop() {
        let (p, x, y) = random_instance(5, 6, 5, 2);
        let a = &p.config().a;
        let mut naive = 0.0;
        for i in 0..6 {
            for j in 0..5 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += x[[i, k]] * y[[k, j]];
                }
                naive += (a[[i, j]] - s).powi(2);
            }
        }
        let v = p.evaluate(x.view(), y.view()).unwrap().value;
        assert!((v - 1.5 * naive).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let (p, x, _) = random_instance(1, 4, 3, 2);
        assert!(p.evaluate(x.view(), Array2::zeros((3, 3)).view()).is_err());
    }

    #[test]
    fn infeasible_flag() {
        let (p, x, y) = random_instance(1, 4, 3, 2);
        let neg = -&y;
        assert!(!p.evaluate(x.view(), neg.view()).unwrap().feasible);
        let p1 = Snmf::new(SnmfConfig { sparsity: 1, ..p.config().clone() }).unwrap();
        assert!(!p1.evaluate(x.view(), y.view()).unwrap().feasible);
    }

    #[test]
    fn zero_residual_gives_zero_gradients() {
        let x = array![[1.0, 0.5], [0.0, 2.0]];
        let y = array![[1.0, 0.0, 1.0], [0.5, 1.0, 0.0]];
        let p = Snmf::new(SnmfConfig { a: x.dot(&y), rank: 2, sparsity: 2, eta_fit: 3.0 }).unwrap();
        let (gx, gy) = p.grad_components(&[0, 1], x.view(), y.view()).unwrap();
        assert!(gx.iter().chain(gy.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn single_row_with_identity_y() {
        // grad_Y of H_i = l·η X_iᵀ(X_i − A_i) when Y = I
        let (p, x, _) = random_instance(9, 4, 3, 3);
        let y = Array2::eye(3);
        let i = 2;
        let (_, gy) = p.grad_components(&[i], x.view(), y.view()).unwrap();
        let d = &x.row(i) - &p.config().a.row(i);
        for k in 0..3 {
            for j in 0..3 {
                let expect = 4.0 * 3.0 * x[[i, k]] * d[j];
                assert!((gy[[k, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let (p, x, y) = random_instance(1, 4, 3, 2);
        assert!(p.grad_components(&[], x.view(), y.view()).is_err());
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let (p, x, y) = random_instance(3, 5, 4, 2);
        let z = BlockPoint { x: Array1::from_iter(x.iter().cloned()), y: Array1::from_iter(y.iter().cloned()) };
        let gx = p.full_grad_x(z.x.view(), z.y.view()).unwrap();
        let gy = p.full_grad_y(z.x.view(), z.y.view()).unwrap();
        let h = 1e-5;
        for i in 0..z.x.len() {
            let (mut a, mut b) = (z.x.clone(), z.x.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (p.smooth_value(a.view(), z.y.view()) - p.smooth_value(b.view(), z.y.view())) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-6 * gx[i].abs().max(1.0));
        }
        for j in 0..z.y.len() {
            let (mut a, mut b) = (z.y.clone(), z.y.clone());
            a[j] += h;
            b[j] -= h;
            let fd = (p.smooth_value(z.x.view(), a.view()) - p.smooth_value(z.x.view(), b.view())) / (2.0 * h);
            assert!((fd - gy[j]).abs() < 1e-6 * gy[j].abs().max(1.0));
        }
    }

    #[test]
    fn partial_lipschitz_examples() {
        let a = Array2::zeros((3, 3));
        let p = Snmf::new(SnmfConfig { a, rank: 3, sparsity: 3, eta_fit: 3.0 }).unwrap();
        let z = BlockPoint { x: Array1::zeros(9), y: Array1::from_iter(Array2::<f64>::eye(3).into_iter()) };
        assert!((p.partial_lipschitz(Block::X, &z).unwrap() - 3.0).abs() < 1e-9);

        let p = Snmf::new(SnmfConfig { a: Array2::zeros((2, 2)), rank: 2, sparsity: 2, eta_fit: 1.0 }).unwrap();
        let z = BlockPoint { x: Array1::zeros(4), y: array![2.0, 0.0, 0.0, 1.0] };
        assert!((p.partial_lipschitz(Block::X, &z).unwrap() - 4.0).abs() < 1e-6 * 4.0);
    }

    #[test]
    fn gradient_lipschitz_bound_holds_on_random_pairs() {
        let (p, _, y) = random_instance(8, 6, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let yv = Array1::from_iter(y.iter().cloned());
        let z = BlockPoint { x: Array1::zeros(18), y: yv.clone() };
        let lx = p.partial_lipschitz(Block::X, &z).unwrap();
        for _ in 0..20 {
            let x1 = Array1::from_shape_fn(18, |_| rng.gen_range(0.0..1.0));
            let x2 = Array1::from_shape_fn(18, |_| rng.gen_range(0.0..1.0));
            let g1 = p.full_grad_x(x1.view(), yv.view()).unwrap();
            let g2 = p.full_grad_x(x2.view(), yv.view()).unwrap();
            let lhs = (&g1 - &g2).mapv(|v| v * v).sum().sqrt();
            let rhs = lx * (&x1 - &x2).mapv(|v| v * v).sum().sqrt();
            assert!(lhs <= rhs * (1.0 + 1e-6));
        }
    }

    #[test]
    fn initial_point_is_feasible_and_deterministic() {
        let (p, _, _) = random_instance(2, 8, 6, 2);
        let p = Snmf::new(SnmfConfig { sparsity: 2, ..p.config().clone() }).unwrap();
        let z = p.initial_point(4);
        assert!(p.objective(&z).feasible);
        assert_eq!(z, p.initial_point(4));
    }
}
