//! Stochastic gradient estimators for `H = (1/n) Σ_i H_i`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::point::{sq_dist, BlockPoint};
use crate::problems::Problem;

mod constants;
mod sampler;

pub use constants::{vr_constants, VRConstants};
pub use sampler::BatchSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Full,
    Sgd,
    Saga,
    Sarah,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Full => "full",
            EstimatorKind::Sgd => "sgd",
            EstimatorKind::Saga => "saga",
            EstimatorKind::Sarah => "sarah",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        *self != EstimatorKind::Full
    }

    pub fn is_variance_reduced(&self) -> bool {
        *self != EstimatorKind::Sgd
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(EstimatorKind::Full),
            "sgd" => Ok(EstimatorKind::Sgd),
            "saga" => Ok(EstimatorKind::Saga),
            "sarah" => Ok(EstimatorKind::Sarah),
            _ => Err(Error::Config(format!("unknown estimator `{s}`"))),
        }
    }
}

/// How SAGA stores its anchors.
///
/// `Literal` keeps the anchor points and re-evaluates every stored component
/// at the current other block (a full pass per estimate). `Table` keeps the
/// component gradients from the time they were stored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SagaMode {
    Literal,
    #[default]
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub saga_mode: SagaMode,
    /// Probability of a SARAH full refresh, the reciprocal of `p`.
    #[serde(default = "default_refresh")]
    pub refresh_prob: f64,
}

fn default_batch() -> usize {
    1
}

fn default_refresh() -> f64 {
    0.05
}

impl EstimatorConfig {
    pub fn full() -> Self {
        Self { kind: EstimatorKind::Full, batch_size: 1, saga_mode: SagaMode::Table, refresh_prob: default_refresh() }
    }

    pub fn sgd(batch_size: usize) -> Self {
        Self { kind: EstimatorKind::Sgd, batch_size, ..Self::full() }
    }

    pub fn saga(batch_size: usize, mode: SagaMode) -> Self {
        Self { kind: EstimatorKind::Saga, batch_size, saga_mode: mode, ..Self::full() }
    }

    pub fn sarah(batch_size: usize, refresh_prob: f64) -> Self {
        Self { kind: EstimatorKind::Sarah, batch_size, refresh_prob, ..Self::full() }
    }

    /// The `p` of `P(refresh) = 1/p`.
    pub fn sarah_p(&self) -> f64 {
        1.0 / self.refresh_prob
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.kind.is_stochastic() && (self.batch_size == 0 || self.batch_size > n) {
            return Err(Error::InvalidParameter(format!("batch size {} outside 1..={n}", self.batch_size)));
        }
        if self.kind == EstimatorKind::Sarah {
            check_refresh_prob(self.refresh_prob)?;
        }
        Ok(())
    }
}

fn check_refresh_prob(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("SARAH refresh probability must lie in (0, 1), got {q} (p = {})", 1.0 / q)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartCoin {
    FullRefresh,
    Recursive,
}

/// One SARAH coin flip: `FullRefresh` with probability `refresh_prob`.
pub fn sarah_flip_restart(rng: &mut impl Rng, refresh_prob: f64) -> Result<RestartCoin> {
    check_refresh_prob(refresh_prob)?;
    Ok(if rng.gen::<f64>() < refresh_prob { RestartCoin::FullRefresh } else { RestartCoin::Recursive })
}

/// Tracked error sequences `Υ_k` (squared) and `Γ_k` (unsquared).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrackedErrors {
    pub upsilon: f64,
    pub gamma: f64,
}

/// Anchor points shared between components; `members[id]` lists the
/// components whose anchor is `points[id]`.
#[derive(Debug, Clone)]
struct AnchorPool {
    owner: Vec<u64>,
    points: BTreeMap<u64, Array1<f64>>,
    next: u64,
}

impl AnchorPool {
    fn new(n: usize, p: Array1<f64>) -> Self {
        Self { owner: vec![0; n], points: BTreeMap::from([(0, p)]), next: 1 }
    }

    fn groups(&self) -> BTreeMap<u64, Vec<usize>> {
        let mut g: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, &id) in self.owner.iter().enumerate() {
            g.entry(id).or_default().push(i);
        }
        g
    }

    fn anchor(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points[&self.owner[i]].view()
    }

    fn reset(&mut self, batch: &[usize], p: ArrayView1<f64>) {
        let id = self.next;
        self.next += 1;
        self.points.insert(id, p.to_owned());
        for &i in batch {
            self.owner[i] = id;
        }
        let live: std::collections::BTreeSet<u64> = self.owner.iter().copied().collect();
        self.points.retain(|id, _| live.contains(id));
    }
}

#[derive(Debug, Clone)]
struct GradTable {
    grads: Vec<Array1<f64>>,
    mean: Array1<f64>,
}

#[derive(Debug, Clone)]
enum SagaState {
    Literal { x: AnchorPool, y: AnchorPool },
    Table { x: GradTable, y: GradTable },
}

#[derive(Debug, Clone, Default)]
struct SarahState {
    x_point: Option<(Array1<f64>, Array1<f64>)>,
    x_est: Option<Array1<f64>>,
    y_point: Option<(Array1<f64>, Array1<f64>)>,
    y_est: Option<Array1<f64>>,
}

/// Estimator state for one run.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    n: usize,
    saga: Option<SagaState>,
    sarah: SarahState,
    coin_rng: ChaCha8Rng,
    coin: RestartCoin,
    iterations: usize,
    evaluations: usize,
    last_error: Option<(f64, f64)>,
}

impl Estimator {
    /// SAGA anchors start at `z0`; the coin stream is derived from `seed`.
    pub fn new(config: EstimatorConfig, problem: &dyn Problem, z0: &BlockPoint, seed: u64) -> Result<Self> {
        let n = problem.n_components();
        config.validate(n)?;
        crate::problems::check_point(problem, z0.x.view(), z0.y.view())?;
        let mut evaluations = 0;
        let saga = match (config.kind, config.saga_mode) {
            (EstimatorKind::Saga, SagaMode::Literal) => {
                Some(SagaState::Literal { x: AnchorPool::new(n, z0.x.clone()), y: AnchorPool::new(n, z0.y.clone()) })
            }
            (EstimatorKind::Saga, SagaMode::Table) => {
                let (x, y) = (z0.x.view(), z0.y.view());
                let gx = (0..n).map(|i| problem.grad_x_component(i, x, y)).collect::<Result<Vec<_>>>()?;
                let gy = (0..n).map(|i| problem.grad_y_component(i, x, y)).collect::<Result<Vec<_>>>()?;
                evaluations = 2 * n;
                Some(SagaState::Table {
                    x: GradTable { grads: gx, mean: problem.full_grad_x(x, y)? },
                    y: GradTable { grads: gy, mean: problem.full_grad_y(x, y)? },
                })
            }
            _ => None,
        };
        let mut coin_rng = ChaCha8Rng::seed_from_u64(seed);
        coin_rng.set_stream(2);
        Ok(Self {
            config,
            n,
            saga,
            sarah: SarahState::default(),
            coin_rng,
            coin: RestartCoin::FullRefresh,
            iterations: 0,
            evaluations,
            last_error: None,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn kind(&self) -> EstimatorKind {
        self.config.kind
    }

    /// Coin of the current iteration (SARAH only; `FullRefresh` at `k = 0`).
    pub fn coin(&self) -> RestartCoin {
        self.coin
    }

    /// Component-gradient evaluations so far, x and y counted separately.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Evaluations in units of full passes over both blocks.
    pub fn epochs(&self) -> f64 {
        self.evaluations as f64 / (2.0 * self.n as f64)
    }

    /// Starts an iteration. SARAH flips its restart coin, except at `k = 0`
    /// where the exact gradient is always used.
    pub fn begin_iteration(&mut self) -> Result<RestartCoin> {
        if self.config.kind == EstimatorKind::Sarah && self.iterations > 0 {
            self.coin = sarah_flip_restart(&mut self.coin_rng, self.config.refresh_prob)?;
        } else {
            self.coin = RestartCoin::FullRefresh;
        }
        self.iterations += 1;
        Ok(self.coin)
    }

    /// `∇̃_x(u, y)`.
    pub fn estimate_x(
        &mut self,
        problem: &dyn Problem,
        u: ArrayView1<f64>,
        y: ArrayView1<f64>,
        batch: &[usize],
    ) -> Result<Array1<f64>> {
        let est = self.estimate(problem, Side::X, u, y, batch)?;
        ensure_finite(est.iter(), "x gradient estimate")?;
        Ok(est)
    }

    /// `∇̃_y(x, v)`.
    pub fn estimate_y(
        &mut self,
        problem: &dyn Problem,
        x: ArrayView1<f64>,
        v: ArrayView1<f64>,
        batch: &[usize],
    ) -> Result<Array1<f64>> {
        let est = self.estimate(problem, Side::Y, x, v, batch)?;
        ensure_finite(est.iter(), "y gradient estimate")?;
        Ok(est)
    }

    fn estimate(
        &mut self,
        problem: &dyn Problem,
        side: Side,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        batch: &[usize],
    ) -> Result<Array1<f64>> {
        let n = self.n;
        let full = |p: &dyn Problem| match side {
            Side::X => p.full_grad_x(x, y),
            Side::Y => p.full_grad_y(x, y),
        };
        match self.config.kind {
            EstimatorKind::Full => {
                self.evaluations += n;
                full(problem)
            }
            EstimatorKind::Sgd => {
                let mut out = side.zeros(problem);
                side.accumulate(problem, batch, x, y, 1.0 / batch.len() as f64, &mut out)?;
                self.evaluations += batch.len();
                Ok(out)
            }
            EstimatorKind::Saga => {
                let w = 1.0 / batch.len() as f64;
                self.evaluations += batch.len();
                // fresh and stored batch terms are summed separately so that
                // synchronized anchors cancel exactly
                let mut fresh_sum = side.zeros(problem);
                let mut stored_sum = side.zeros(problem);
                let mut out = side.zeros(problem);
                match self.saga.as_mut().expect("SAGA state") {
                    SagaState::Literal { x: px, y: py } => {
                        let pool = side.pick(px, py);
                        for &i in batch {
                            side.accumulate(problem, &[i], x, y, w, &mut fresh_sum)?;
                            let (ax, ay) = side.at_anchor(x.view(), y.view(), pool.anchor(i));
                            side.accumulate(problem, &[i], ax, ay, w, &mut stored_sum)?;
                        }
                        for (id, members) in pool.groups() {
                            let (ax, ay) = side.at_anchor(x.view(), y.view(), pool.points[&id].view());
                            side.accumulate(problem, &members, ax, ay, 1.0 / n as f64, &mut out)?;
                        }
                        pool.reset(batch, side.own(x.view(), y.view()));
                    }
                    SagaState::Table { x: tx, y: ty } => {
                        let table = side.pick(tx, ty);
                        let mut fresh = Vec::with_capacity(batch.len());
                        for &i in batch {
                            let mut g = side.zeros(problem);
                            side.accumulate(problem, &[i], x, y, 1.0, &mut g)?;
                            fresh_sum.scaled_add(w, &g);
                            stored_sum.scaled_add(w, &table.grads[i]);
                            fresh.push(g);
                        }
                        out.assign(&table.mean);
                        for (&i, g) in batch.iter().zip(fresh) {
                            table.mean.scaled_add(1.0 / n as f64, &(&g - &table.grads[i]));
                            table.grads[i] = g;
                        }
                    }
                }
                fresh_sum -= &stored_sum;
                out += &fresh_sum;
                Ok(out)
            }
            EstimatorKind::Sarah => {
                let (point, est) = match side {
                    Side::X => (&mut self.sarah.x_point, &mut self.sarah.x_est),
                    Side::Y => (&mut self.sarah.y_point, &mut self.sarah.y_est),
                };
                let out = match (self.coin, point.as_ref(), est.as_ref()) {
                    (RestartCoin::Recursive, Some((px, py)), Some(prev)) => {
                        let w = 1.0 / batch.len() as f64;
                        let mut out = prev.clone();
                        side.accumulate(problem, batch, x, y, w, &mut out)?;
                        side.accumulate(problem, batch, px.view(), py.view(), -w, &mut out)?;
                        self.evaluations += batch.len();
                        out
                    }
                    _ => {
                        self.evaluations += n;
                        full(problem)?
                    }
                };
                *point = Some((x.to_owned(), y.to_owned()));
                *est = Some(out.clone());
                Ok(out)
            }
        }
    }

    /// Records the realized squared errors of the latest x and y estimates.
    pub fn observe_error(&mut self, sq_error_x: f64, sq_error_y: f64) {
        self.last_error = Some((sq_error_x, sq_error_y));
    }

    /// `Υ_k` and `Γ_k` for the next estimates at `(u, y)` and `(x, v)`.
    ///
    /// For SAGA this evaluates the anchor differences without changing any
    /// state; Table mode measures against the stored gradients. SARAH and SGD
    /// report the realized error passed to [`Estimator::observe_error`].
    pub fn tracked(
        &self,
        problem: &dyn Problem,
        u: ArrayView1<f64>,
        y: ArrayView1<f64>,
        x: ArrayView1<f64>,
        v: ArrayView1<f64>,
    ) -> Result<TrackedErrors> {
        let scale = 1.0 / (self.config.batch_size as f64 * self.n as f64);
        match (&self.config.kind, &self.saga) {
            (EstimatorKind::Full, _) => Ok(TrackedErrors::default()),
            (EstimatorKind::Saga, Some(state)) => {
                let (mut sx, mut sy) = (0.0, 0.0);
                for j in 0..self.n {
                    let gx = problem.grad_x_component(j, u, y)?;
                    let gy = problem.grad_y_component(j, x, v)?;
                    match state {
                        SagaState::Literal { x: px, y: py } => {
                            sx += sq_dist(gx.view(), problem.grad_x_component(j, px.anchor(j), y)?.view());
                            sy += sq_dist(gy.view(), problem.grad_y_component(j, x, py.anchor(j))?.view());
                        }
                        SagaState::Table { x: tx, y: ty } => {
                            sx += sq_dist(gx.view(), tx.grads[j].view());
                            sy += sq_dist(gy.view(), ty.grads[j].view());
                        }
                    }
                }
                let (vx, vy) = (scale * sx, 4.0 * scale * sy);
                Ok(TrackedErrors { upsilon: vx + vy, gamma: vx.sqrt() + vy.sqrt() })
            }
            _ => Ok(match self.last_error {
                Some((ex, ey)) => TrackedErrors { upsilon: ex + ey, gamma: ex.sqrt() + ey.sqrt() },
                None => TrackedErrors::default(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    X,
    Y,
}

impl Side {
    fn zeros(self, p: &dyn Problem) -> Array1<f64> {
        match self {
            Side::X => Array1::zeros(p.x_dim()),
            Side::Y => Array1::zeros(p.y_dim()),
        }
    }

    fn accumulate(
        self,
        p: &dyn Problem,
        batch: &[usize],
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        w: f64,
        out: &mut Array1<f64>,
    ) -> Result<()> {
        match self {
            Side::X => p.accumulate_grad_x(batch, x, y, w, out),
            Side::Y => p.accumulate_grad_y(batch, x, y, w, out),
        }
    }

    fn pick<'a, T>(self, x: &'a mut T, y: &'a mut T) -> &'a mut T {
        match self {
            Side::X => x,
            Side::Y => y,
        }
    }

    /// The evaluation point with the estimated block replaced by `anchor`.
    fn at_anchor<'a>(
        self,
        x: ArrayView1<'a, f64>,
        y: ArrayView1<'a, f64>,
        anchor: ArrayView1<'a, f64>,
    ) -> (ArrayView1<'a, f64>, ArrayView1<'a, f64>) {
        match self {
            Side::X => (anchor, y),
            Side::Y => (x, anchor),
        }
    }

    fn own<'a>(self, x: ArrayView1<'a, f64>, y: ArrayView1<'a, f64>) -> ArrayView1<'a, f64> {
        match self {
            Side::X => x,
            Side::Y => y,
        }
    }
}
