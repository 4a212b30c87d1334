//! Strongly convex coupled least squares, used as a well-conditioned
//! synthetic instance:
//! `H_i(x, y) = ½(a_iᵀx + b_iᵀy − c_i)² + (μ/2)(‖x‖² + ‖y‖²)` with `f = g = 0`.

use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::lipschitz::lambda_max_dense;
use super::{check_batch, check_point, Block, LipschitzEstimates, Problem};
use crate::error::{ensure_finite, ensure_same_len, Error, Result};
use crate::point::BlockPoint;

#[derive(Debug, Clone)]
pub struct CoupledQuadratic {
    a: Array2<f64>,
    b: Array2<f64>,
    c: Array1<f64>,
    mu: f64,
}

impl CoupledQuadratic {
    pub fn new(a: Array2<f64>, b: Array2<f64>, c: Array1<f64>, mu: f64) -> Result<Self> {
        ensure_same_len(a.nrows(), b.nrows(), "quadratic coefficient rows")?;
        ensure_same_len(a.nrows(), c.len(), "quadratic targets")?;
        if a.nrows() == 0 {
            return Err(Error::InvalidParameter("at least one component required".into()));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        ensure_finite(a.iter().chain(b.iter()).chain(c.iter()), "quadratic data")?;
        Ok(Self { a, b, c, mu })
    }

    /// Gaussian coefficients and targets.
    pub fn random(n: usize, x_dim: usize, y_dim: usize, mu: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |r, c| Array2::from_shape_simple_fn((r, c), || rng.sample::<f64, _>(StandardNormal));
        let a = gauss(n, x_dim);
        let b = gauss(n, y_dim);
        let c = gauss(n, 1).column(0).to_owned();
        Self::new(a, b, c, mu)
    }

    fn joint(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.a.view(), self.b.view()]).expect("equal row counts")
    }

    fn residual(&self, i: usize, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        self.a.row(i).dot(&x) + self.b.row(i).dot(&y) - self.c[i]
    }

    /// Unique minimiser of `H`, by conjugate gradients on the normal equations.
    pub fn minimizer(&self) -> Result<BlockPoint> {
        let g = self.joint();
        let n = g.nrows() as f64;
        let apply = |v: &Array1<f64>| g.t().dot(&g.dot(v)) / n + v * self.mu;
        let rhs = g.t().dot(&self.c) / n;
        let mut z = Array1::zeros(g.ncols());
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = r.dot(&r);
        let tol = 1e-28 * rhs.dot(&rhs).max(1e-300);
        for _ in 0..10 * g.ncols().max(10) {
            if rr <= tol {
                break;
            }
            let ap = apply(&p);
            let step = rr / p.dot(&ap);
            z.scaled_add(step, &p);
            r.scaled_add(-step, &ap);
            let next = r.dot(&r);
            p = &r + &(&p * (next / rr));
            rr = next;
        }
        if !(rr <= tol * 1e6) {
            return Err(Error::NoConvergence { what: "conjugate gradients", last_estimate: rr.sqrt() });
        }
        let dx = self.a.ncols();
        Ok(BlockPoint { x: z.slice(ndarray::s![..dx]).to_owned(), y: z.slice(ndarray::s![dx..]).to_owned() })
    }

    fn gram_lambda_max(&self, m: &Array2<f64>) -> Result<f64> {
        let gram = m.t().dot(m) / m.nrows() as f64;
        lambda_max_dense(gram.as_slice().expect("standard layout"), m.ncols())
    }
}

impl Problem for CoupledQuadratic {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn x_dim(&self) -> usize {
        self.a.ncols()
    }

    fn y_dim(&self) -> usize {
        self.b.ncols()
    }

    fn n_components(&self) -> usize {
        self.a.nrows()
    }

    fn smooth_value(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        let n = self.n_components();
        let fit: f64 = (0..n).map(|i| self.residual(i, x, y).powi(2)).sum::<f64>() / (2.0 * n as f64);
        fit + 0.5 * self.mu * (x.dot(&x) + y.dot(&y))
    }

    fn is_feasible_x(&self, x: ArrayView1<f64>) -> bool {
        x.len() == self.x_dim()
    }

    fn is_feasible_y(&self, y: ArrayView1<f64>) -> bool {
        y.len() == self.y_dim()
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
        check_batch(batch, self.n_components())?;
        for &i in batch {
            out.scaled_add(weight * self.residual(i, x, y), &self.a.row(i));
        }
        out.scaled_add(weight * batch.len() as f64 * self.mu, &x);
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
        check_batch(batch, self.n_components())?;
        for &i in batch {
            out.scaled_add(weight * self.residual(i, x, y), &self.b.row(i));
        }
        out.scaled_add(weight * batch.len() as f64 * self.mu, &y);
        Ok(())
    }

    fn prox_f(&self, v: ArrayView1<f64>, _step: f64) -> Result<Array1<f64>> {
        Ok(v.to_owned())
    }

    fn prox_g(&self, v: ArrayView1<f64>, _step: f64) -> Result<Array1<f64>> {
        Ok(v.to_owned())
    }

    fn partial_lipschitz(&self, block: Block, _point: &BlockPoint) -> Result<f64> {
        let m = match block {
            Block::X => &self.a,
            Block::Y => &self.b,
        };
        Ok(self.gram_lambda_max(m)? + self.mu)
    }

    fn lipschitz_hint(&self, point: &BlockPoint, per_component: bool) -> Result<LipschitzEstimates> {
        if per_component {
            let row_max = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.dot(&r)).fold(0.0, f64::max);
            let joint = self.joint();
            Ok(LipschitzEstimates::new(row_max(&self.a).max(row_max(&self.b)) + self.mu, row_max(&joint) + self.mu))
        } else {
            let l = self.partial_lipschitz(Block::X, point)?.max(self.partial_lipschitz(Block::Y, point)?);
            Ok(LipschitzEstimates::new(l, self.gram_lambda_max(&self.joint())? + self.mu))
        }
    }

    fn initial_point(&self, seed: u64) -> BlockPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array1::from_shape_fn(self.x_dim(), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(self.y_dim(), |_| rng.gen_range(-1.0..1.0));
        BlockPoint { x, y }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizer_zeroes_the_gradient() {
        let p = CoupledQuadratic::random(30, 4, 3, 0.1, 1).unwrap();
        let z = p.minimizer().unwrap();
        let gx = p.full_grad_x(z.x.view(), z.y.view()).unwrap();
        let gy = p.full_grad_y(z.x.view(), z.y.view()).unwrap();
        assert!(gx.iter().chain(gy.iter()).all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = CoupledQuadratic::random(12, 3, 2, 0.5, 2).unwrap();
        let z = p.initial_point(0);
        let gx = p.full_grad_x(z.x.view(), z.y.view()).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let (mut a, mut b) = (z.x.clone(), z.x.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (p.smooth_value(a.view(), z.y.view()) - p.smooth_value(b.view(), z.y.view())) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn component_average_is_the_full_gradient() {
        let p = CoupledQuadratic::random(5, 2, 2, 0.2, 3).unwrap();
        let z = p.initial_point(1);
        let mut avg = Array1::zeros(2);
        for i in 0..5 {
            avg += &(p.grad_y_component(i, z.x.view(), z.y.view()).unwrap() / 5.0);
        }
        let full = p.full_grad_y(z.x.view(), z.y.view()).unwrap();
        assert!((&avg - &full).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_nonpositive_mu() {
        assert!(CoupledQuadratic::random(3, 2, 2, 0.0, 0).is_err());
    }
}
