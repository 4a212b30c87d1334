//! Finite-sum problems `Φ(x, y) = f(x) + H(x, y) + g(y)` with
//! `H = (1/n) Σ_i H_i`.
//!
//! `f` and `g` are indicator functions in every shipped problem; the objective
//! is therefore reported as the smooth value of `H` together with a
//! feasibility flag.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::BlockPoint;

pub mod bid;
pub mod conv;
pub mod lipschitz;
pub mod projection;
pub mod quadratic;
pub mod snmf;

pub use bid::{Bid, BidConfig};
pub use quadratic::CoupledQuadratic;
pub use snmf::{Snmf, SnmfConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub feasible: bool,
}

/// Lipschitz bounds used by the step-size condition and the Lyapunov
/// constants: `l` bounds the partial-gradient moduli, `m` the whole gradient
/// on the iterate region and `n = max(l, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimates {
    pub l: f64,
    pub m: f64,
    pub n: f64,
}

impl LipschitzEstimates {
    pub fn new(l: f64, m: f64) -> Self {
        Self { l, m, n: l.max(m) }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.l * factor, self.m * factor)
    }
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;

    fn x_dim(&self) -> usize;

    fn y_dim(&self) -> usize;

    /// Number of components `n` in `H = (1/n) Σ H_i`.
    fn n_components(&self) -> usize;

    /// Value of the smooth coupling `H(x, y)`.
    fn smooth_value(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64;

    fn is_feasible_x(&self, x: ArrayView1<f64>) -> bool;

    fn is_feasible_y(&self, y: ArrayView1<f64>) -> bool;

    /// `out += weight · Σ_{i ∈ batch} ∇_x H_i(x, y)`.
    fn accumulate_grad_x(
        &self,
        batch: &[usize],
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        weight: f64,
        out: &mut Array1<f64>,
    ) -> Result<()>;

    /// `out += weight · Σ_{i ∈ batch} ∇_y H_i(x, y)`.
    fn accumulate_grad_y(
        &self,
        batch: &[usize],
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        weight: f64,
        out: &mut Array1<f64>,
    ) -> Result<()>;

    /// Euclidean projection onto the domain of `f` (the prox of an indicator).
    fn prox_f(&self, v: ArrayView1<f64>, step: f64) -> Result<Array1<f64>>;

    fn prox_g(&self, v: ArrayView1<f64>, step: f64) -> Result<Array1<f64>>;

    /// Lipschitz modulus of `∇_block H` with the other block held at `point`.
    fn partial_lipschitz(&self, block: Block, point: &BlockPoint) -> Result<f64>;

    /// Lipschitz bounds around `point`. With `per_component` the bounds refer
    /// to the individual `∇H_i`, otherwise to `∇H`.
    fn lipschitz_hint(&self, point: &BlockPoint, per_component: bool) -> Result<LipschitzEstimates>;

    /// Deterministic starting point for a run seed.
    fn initial_point(&self, seed: u64) -> BlockPoint;

    fn objective(&self, z: &BlockPoint) -> Objective {
        Objective {
            value: self.smooth_value(z.x.view(), z.y.view()),
            feasible: self.is_feasible_x(z.x.view()) && self.is_feasible_y(z.y.view()),
        }
    }

    fn grad_x_component(&self, i: usize, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(self.x_dim());
        self.accumulate_grad_x(&[i], x, y, 1.0, &mut out)?;
        Ok(out)
    }

    fn grad_y_component(&self, i: usize, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(self.y_dim());
        self.accumulate_grad_y(&[i], x, y, 1.0, &mut out)?;
        Ok(out)
    }

    /// Exact `∇_x H(x, y)`.
    fn full_grad_x(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.n_components();
        let all: Vec<usize> = (0..n).collect();
        let mut out = Array1::zeros(self.x_dim());
        self.accumulate_grad_x(&all, x, y, 1.0 / n as f64, &mut out)?;
        Ok(out)
    }

    /// Exact `∇_y H(x, y)`.
    fn full_grad_y(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.n_components();
        let all: Vec<usize> = (0..n).collect();
        let mut out = Array1::zeros(self.y_dim());
        self.accumulate_grad_y(&all, x, y, 1.0 / n as f64, &mut out)?;
        Ok(out)
    }
}

/// Lipschitz constant of the chosen partial gradient at `point`.
pub fn estimate_partial_lipschitz(problem: &dyn Problem, block: Block, point: &BlockPoint) -> Result<f64> {
    problem.partial_lipschitz(block, point)
}

pub(crate) fn check_batch(batch: &[usize], n: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidParameter(format!("component index {i} out of range 0..{n}")));
    }
    Ok(())
}

pub(crate) fn check_point(problem: &dyn Problem, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<()> {
    crate::error::ensure_same_len(problem.x_dim(), x.len(), "x block")?;
    crate::error::ensure_same_len(problem.y_dim(), y.len(), "y block")
}
