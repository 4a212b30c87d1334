//! Independent reference code shared by the integration tests. Nothing here
//! calls into the solver; the gradients, projections and iterations are
//! written directly against dense matrices.

#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use stibpalm::harness::synthetic::planted_snmf;
use stibpalm::{BlockPoint, Snmf};

pub fn snmf_instance(rows: usize, cols: usize, rank: usize, seed: u64) -> Snmf {
    let planted = planted_snmf(rows, cols, rank, 0.25, 0.01, seed).unwrap();
    Snmf::new(planted.snmf_config(3.0)).unwrap()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let d = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    d.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub struct DenseSnmf {
    pub a: Array2<f64>,
    pub eta: f64,
    pub s: usize,
    pub rank: usize,
}

impl DenseSnmf {
    pub fn of(p: &Snmf) -> Self {
        let c = p.config();
        Self { a: c.a.clone(), eta: c.eta_fit, s: c.sparsity, rank: c.rank }
    }

    pub fn split(&self, z: &BlockPoint) -> (Array2<f64>, Array2<f64>) {
        let (l, m) = self.a.dim();
        let x = z.x.clone().into_shape((l, self.rank)).unwrap();
        let y = z.y.clone().into_shape((self.rank, m)).unwrap();
        (x, y)
    }

    pub fn join(x: &Array2<f64>, y: &Array2<f64>) -> BlockPoint {
        BlockPoint { x: Array1::from_iter(x.iter().cloned()), y: Array1::from_iter(y.iter().cloned()) }
    }

    pub fn value(&self, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let r = x.dot(y) - &self.a;
        0.5 * self.eta * r.iter().map(|v| v * v).sum::<f64>()
    }

    /// `η (XY − A) Yᵀ`
    pub fn grad_x(&self, x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
        (x.dot(y) - &self.a).dot(&y.t()) * self.eta
    }

    /// `η Xᵀ (XY − A)`
    pub fn grad_y(&self, x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
        x.t().dot(&(x.dot(y) - &self.a)) * self.eta
    }

    pub fn lip_x(&self, y: &Array2<f64>) -> f64 {
        self.eta * lambda_max(&y.dot(&y.t()))
    }

    pub fn lip_y(&self, x: &Array2<f64>) -> f64 {
        self.eta * lambda_max(&x.t().dot(x))
    }

    /// Keep the `s` largest nonnegative entries of each column.
    pub fn project_x(&self, v: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(v.dim());
        for j in 0..v.ncols() {
            let mut idx: Vec<usize> = (0..v.nrows()).collect();
            idx.sort_by(|&a, &b| v[[b, j]].max(0.0).partial_cmp(&v[[a, j]].max(0.0)).unwrap().then(a.cmp(&b)));
            for &i in idx.iter().take(self.s) {
                out[[i, j]] = v[[i, j]].max(0.0);
            }
        }
        out
    }

    pub fn project_y(&self, v: &Array2<f64>) -> Array2<f64> {
        v.mapv(|t| if t > 0.0 { t } else { 0.0 })
    }
}

pub fn ratio(k: usize) -> f64 {
    let k = k as f64;
    ((k - 1.0) / (k + 2.0)).max(0.0)
}

/// Alternating projected gradient steps with fixed step sizes `1/tx`, `1/ty`.
pub fn palm(p: &DenseSnmf, z0: &BlockPoint, tx: f64, ty: f64, iters: usize) -> Vec<BlockPoint> {
    let (mut x, mut y) = p.split(z0);
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        x = p.project_x(&(&x - &(p.grad_x(&x, &y) / tx)));
        y = p.project_y(&(&y - &(p.grad_y(&x, &y) / ty)));
        out.push(DenseSnmf::join(&x, &y));
    }
    out
}

/// Heavy-ball extrapolation `w = z + β(z − z_prev)` used both as the gradient
/// point and as the base of the step, with `β = (k − 1)/(k + 2)`.
pub fn ipalm(p: &DenseSnmf, z0: &BlockPoint, tx: f64, ty: f64, iters: usize) -> Vec<BlockPoint> {
    let (mut x, mut y) = p.split(z0);
    let (mut xp, mut yp) = (x.clone(), y.clone());
    let mut out = Vec::with_capacity(iters);
    for k in 0..iters {
        let b = ratio(k);
        let u = &x + &((&x - &xp) * b);
        let xn = p.project_x(&(&u - &(p.grad_x(&u, &y) / tx)));
        let v = &y + &((&y - &yp) * b);
        let yn = p.project_y(&(&v - &(p.grad_y(&xn, &v) / ty)));
        xp = std::mem::replace(&mut x, xn);
        yp = std::mem::replace(&mut y, yn);
        out.push(DenseSnmf::join(&x, &y));
    }
    out
}

/// Gradient at the current point, with the two previous displacements added
/// to the step base with weights `α/θ`, `α = (k − 1)/(k + 2)`.
pub fn tipalm(p: &DenseSnmf, z0: &BlockPoint, tx: f64, ty: f64, iters: usize) -> Vec<BlockPoint> {
    let (mut x, mut y) = p.split(z0);
    let (mut x1, mut y1) = (x.clone(), y.clone());
    let (mut x2, mut y2) = (x.clone(), y.clone());
    let mut out = Vec::with_capacity(iters);
    for k in 0..iters {
        let a = ratio(k);
        let bx = &x + &((&x - &x1) * (a / tx)) + &((&x1 - &x2) * (a / tx));
        let xn = p.project_x(&(&bx - &(p.grad_x(&x, &y) / tx)));
        let by = &y + &((&y - &y1) * (a / ty)) + &((&y1 - &y2) * (a / ty));
        let yn = p.project_y(&(&by - &(p.grad_y(&xn, &y) / ty)));
        x2 = std::mem::replace(&mut x1, std::mem::replace(&mut x, xn));
        y2 = std::mem::replace(&mut y1, std::mem::replace(&mut y, yn));
        out.push(DenseSnmf::join(&x, &y));
    }
    out
}

pub fn max_abs_diff(a: &BlockPoint, b: &BlockPoint) -> f64 {
    let d = |u: &Array1<f64>, v: &Array1<f64>| u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    d(&a.x, &b.x).max(d(&a.y, &b.y))
}
