//! Blind image deconvolution
//! `min ½‖A − X ⊙ Y‖²_F + η Σ_r log(1 + σ [D X]_r²)`
//! over images `0 ≤ X ≤ 1` and kernels `0 ≤ Y ≤ 1, ‖Y‖₁ ≤ 1`.
//!
//! `D` collects the periodic horizontal and vertical forward differences.
//! The components are contiguous row strips of the residual:
//! `H_i = n · ½‖(A − X ⊙ Y)_{strip i}‖² + η R(X)`, so that `(1/n) Σ_i H_i = H`.

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{check_kernel, conv_rows, kernel_adjoint, scatter_adjoint, wrap};
use super::lipschitz::lambda_max_dense;
use super::projection::{prox_bid_x, prox_bid_y};
use super::{check_batch, check_point, Block, LipschitzEstimates, Objective, Problem};
use crate::error::{ensure_finite, ensure_same_len, Error, Result};
use crate::point::BlockPoint;

const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct BidConfig {
    /// Blurred image with pixels in `[0, 1]`.
    pub a: Array2<f64>,
    /// Odd kernel side length.
    pub kernel_size: usize,
    pub eta_reg: f64,
    pub sigma: f64,
    pub n_strips: usize,
}

impl BidConfig {
    pub fn new(a: Array2<f64>, kernel_size: usize) -> Self {
        let n_strips = a.nrows().min(64);
        Self { a, kernel_size, eta_reg: 5e-5, sigma: 1e3, n_strips }
    }
}

#[derive(Debug, Clone)]
pub struct Bid {
    cfg: BidConfig,
    strips: Vec<Range<usize>>,
}

impl Bid {
    pub fn new(cfg: BidConfig) -> Result<Self> {
        let (d1, d2) = cfg.a.dim();
        check_kernel((d1, d2), (cfg.kernel_size, cfg.kernel_size))?;
        if !(cfg.eta_reg > 0.0) || !(cfg.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eta_reg and sigma must be positive, got {} and {}",
                cfg.eta_reg, cfg.sigma
            )));
        }
        if cfg.n_strips == 0 || cfg.n_strips > d1 {
            return Err(Error::InvalidParameter(format!("n_strips {} outside 1..={d1}", cfg.n_strips)));
        }
        ensure_finite(cfg.a.iter(), "blurred image")?;
        if cfg.a.iter().any(|&v| !(-FEAS_TOL..=1.0 + FEAS_TOL).contains(&v)) {
            return Err(Error::InvalidParameter("blurred image must have pixels in [0, 1]".into()));
        }
        let n = cfg.n_strips;
        let strips = (0..n).map(|i| (i * d1 / n)..((i + 1) * d1 / n)).collect();
        Ok(Self { cfg, strips })
    }

    pub fn config(&self) -> &BidConfig {
        &self.cfg
    }

    pub fn image_dim(&self) -> (usize, usize) {
        self.cfg.a.dim()
    }

    /// Rows covered by strip `i`.
    pub fn strip(&self, i: usize) -> Range<usize> {
        self.strips[i].clone()
    }

    pub fn x_view<'a>(&self, x: ArrayView1<'a, f64>) -> Result<ArrayView2<'a, f64>> {
        ensure_same_len(self.x_dim(), x.len(), "bid image")?;
        Ok(x.into_shape(self.image_dim()).expect("contiguous image"))
    }

    pub fn y_view<'a>(&self, y: ArrayView1<'a, f64>) -> Result<ArrayView2<'a, f64>> {
        let k = self.cfg.kernel_size;
        ensure_same_len(k * k, y.len(), "bid kernel")?;
        Ok(y.into_shape((k, k)).expect("contiguous kernel"))
    }

    fn check_dims(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<()> {
        ensure_same_len(self.x_dim(), x.len(), "bid image")?;
        ensure_same_len(self.image_dim().0, x.nrows(), "bid image rows")?;
        ensure_same_len(self.cfg.kernel_size, y.nrows(), "bid kernel rows")?;
        ensure_same_len(self.cfg.kernel_size, y.ncols(), "bid kernel cols")
    }

    /// `η Σ_r log(1 + σ v_r²)` over the periodic forward differences of `x`.
    pub fn regularizer(&self, x: ArrayView2<f64>) -> f64 {
        let s = self.cfg.sigma;
        let mut acc = 0.0;
        for_each_difference(x, |_, _, v| acc += (s * v * v).ln_1p());
        self.cfg.eta_reg * acc
    }

    /// `out += weight · η ∇R(x)`.
    fn add_regularizer_grad(&self, x: ArrayView2<f64>, weight: f64, out: &mut ArrayViewMut2<f64>) {
        let s = self.cfg.sigma;
        let c = weight * self.cfg.eta_reg;
        for_each_difference(x, |hi, lo, v| {
            let d = c * 2.0 * s * v / (1.0 + s * v * v);
            out[hi] += d;
            out[lo] -= d;
        });
    }

    pub fn data_fit(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
        let mut blurred = Array2::zeros(self.image_dim());
        conv_rows(x, y, 0..self.image_dim().0, &mut blurred);
        0.5 * (&self.cfg.a - &blurred).iter().map(|v| v * v).sum::<f64>()
    }

    pub fn evaluate(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Objective> {
        self.check_dims(x, y)?;
        Ok(Objective {
            value: self.data_fit(x, y) + self.regularizer(x),
            feasible: feasible_x(x.iter()) && feasible_y(y.iter()),
        })
    }

    /// Average of the strip-component gradients over `batch`.
    pub fn grad_components(
        &self,
        batch: &[usize],
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_dims(x, y)?;
        check_batch(batch, self.cfg.n_strips)?;
        let w = 1.0 / batch.len() as f64;
        let mut gx = Array2::zeros(x.dim());
        let mut gy = Array2::zeros(y.dim());
        self.accumulate(batch, x, y, w, Some(gx.view_mut()), Some(gy.view_mut()));
        Ok((gx, gy))
    }

    fn accumulate(
        &self,
        batch: &[usize],
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        weight: f64,
        mut gx: Option<ArrayViewMut2<f64>>,
        mut gy: Option<ArrayViewMut2<f64>>,
    ) {
        let n = self.cfg.n_strips as f64;
        let mut resid = Array2::zeros(self.image_dim());
        for &i in batch {
            let rows = self.strip(i);
            conv_rows(x, y, rows.clone(), &mut resid);
            for r in rows.clone() {
                let mut row = resid.row_mut(r);
                row -= &self.cfg.a.row(r);
            }
            if let Some(gx) = gx.as_mut() {
                scatter_adjoint(resid.view(), y, rows.clone(), weight * n, gx.view_mut());
            }
            if let Some(gy) = gy.as_mut() {
                kernel_adjoint(resid.view(), x, rows, weight * n, gy.view_mut());
            }
        }
        if let Some(gx) = gx.as_mut() {
            self.add_regularizer_grad(x, weight * batch.len() as f64, gx);
        }
    }

    /// Circular autocorrelation `C(s, t) = Σ_{p,q} X(p, q) X(p + s, q + t)`
    /// for `|s|, |t| < k`, stored with offset `k − 1`.
    fn autocorrelation(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (d1, d2) = x.dim();
        let k = self.cfg.kernel_size as isize;
        let w = (2 * k - 1) as usize;
        let mut c = Array2::zeros((w, w));
        for s in -(k - 1)..k {
            for t in -(k - 1)..k {
                let mut acc = 0.0;
                for p in 0..d1 {
                    let ps = wrap(p as isize + s, d1);
                    for q in 0..d2 {
                        acc += x[[p, q]] * x[[ps, wrap(q as isize + t, d2)]];
                    }
                }
                c[[(s + k - 1) as usize, (t + k - 1) as usize]] = acc;
            }
        }
        c
    }

    fn kernel_gram(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let k = self.cfg.kernel_size;
        let c = self.autocorrelation(x);
        let dim = k * k;
        let mut g = vec![0.0; dim * dim];
        for a in 0..k {
            for b in 0..k {
                for a2 in 0..k {
                    for b2 in 0..k {
                        let (s, t) = (a + k - 1 - a2, b + k - 1 - b2);
                        g[(a * k + b) * dim + a2 * k + b2] = c[[s, t]];
                    }
                }
            }
        }
        g
    }
}

/// Calls `f(hi, lo, v)` with `v = x[hi] − x[lo]` for every periodic forward
/// difference.
fn for_each_difference(x: ArrayView2<f64>, mut f: impl FnMut([usize; 2], [usize; 2], f64)) {
    let (d1, d2) = x.dim();
    for i in 0..d1 {
        for j in 0..d2 {
            let right = [i, (j + 1) % d2];
            f(right, [i, j], x[right] - x[[i, j]]);
            let down = [(i + 1) % d1, j];
            f(down, [i, j], x[down] - x[[i, j]]);
        }
    }
}

fn feasible_x<'a>(x: impl Iterator<Item = &'a f64>) -> bool {
    x.into_iter().all(|&v| (-FEAS_TOL..=1.0 + FEAS_TOL).contains(&v))
}

fn feasible_y<'a>(y: impl Iterator<Item = &'a f64> + Clone) -> bool {
    feasible_x(y.clone()) && y.sum::<f64>() <= 1.0 + FEAS_TOL
}

impl Problem for Bid {
    fn name(&self) -> &'static str {
        "bid"
    }

    fn x_dim(&self) -> usize {
        self.cfg.a.len()
    }

    fn y_dim(&self) -> usize {
        self.cfg.kernel_size * self.cfg.kernel_size
    }

    fn n_components(&self) -> usize {
        self.cfg.n_strips
    }

    fn smooth_value(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        let (xm, ym) = (self.x_view(x).expect("x dim"), self.y_view(y).expect("y dim"));
        self.data_fit(xm, ym) + self.regularizer(xm)
    }

    fn is_feasible_x(&self, x: ArrayView1<f64>) -> bool {
        x.len() == self.x_dim() && feasible_x(x.iter())
    }

    fn is_feasible_y(&self, y: ArrayView1<f64>) -> bool {
        y.len() == self.y_dim() && feasible_y(y.iter())
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
        check_batch(batch, self.cfg.n_strips)?;
        ensure_same_len(self.x_dim(), out.len(), "bid grad X buffer")?;
        let (xm, ym) = (self.x_view(x)?, self.y_view(y)?);
        let g = out.view_mut().into_shape(self.image_dim()).expect("contiguous buffer");
        self.accumulate(batch, xm, ym, weight, Some(g), None);
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
        check_batch(batch, self.cfg.n_strips)?;
        ensure_same_len(self.y_dim(), out.len(), "bid grad Y buffer")?;
        let (xm, ym) = (self.x_view(x)?, self.y_view(y)?);
        let k = self.cfg.kernel_size;
        let g = out.view_mut().into_shape((k, k)).expect("contiguous buffer");
        self.accumulate(batch, xm, ym, weight, None, Some(g));
        Ok(())
    }

    fn prox_f(&self, v: ArrayView1<f64>, _step: f64) -> Result<Array1<f64>> {
        ensure_same_len(self.x_dim(), v.len(), "bid image prox")?;
        Ok(prox_bid_x(v))
    }

    fn prox_g(&self, v: ArrayView1<f64>, _step: f64) -> Result<Array1<f64>> {
        ensure_same_len(self.y_dim(), v.len(), "bid kernel prox")?;
        prox_bid_y(v)
    }

    fn partial_lipschitz(&self, block: Block, point: &BlockPoint) -> Result<f64> {
        match block {
            Block::X => {
                let l1: f64 = point.y.iter().map(|v| v.abs()).sum();
                Ok(l1 * l1 + 16.0 * self.cfg.eta_reg * self.cfg.sigma)
            }
            Block::Y => {
                let xm = self.x_view(point.x.view())?;
                lambda_max_dense(&self.kernel_gram(xm), self.y_dim())
            }
        }
    }

    fn lipschitz_hint(&self, point: &BlockPoint, per_component: bool) -> Result<LipschitzEstimates> {
        let reg = 16.0 * self.cfg.eta_reg * self.cfg.sigma;
        let lx = self.partial_lipschitz(Block::X, point)? - reg;
        let ly = self.partial_lipschitz(Block::Y, point)?;
        let (xm, ym) = (self.x_view(point.x.view())?, self.y_view(point.y.view())?);
        let resid = (2.0 * self.data_fit(xm, ym)).sqrt();
        let scale = if per_component { self.cfg.n_strips as f64 } else { 1.0 };
        let l = scale * lx.max(ly) + reg;
        let m = scale * (lx + ly + 2.0 * (lx * ly).sqrt() + resid) + reg;
        Ok(LipschitzEstimates::new(l, m))
    }

    /// The blurred image itself and a random kernel normalised to unit mass.
    fn initial_point(&self, seed: u64) -> BlockPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = prox_bid_x(Array1::from_iter(self.cfg.a.iter().cloned()).view());
        let mut y0 = Array1::from_shape_fn(self.y_dim(), |_| rng.gen_range(0.0..1.0));
        let total = y0.sum();
        y0 /= total;
        BlockPoint { x: x0, y: y0 }
    }
}
