//! The two-step inertial Bregman proximal alternating linearized iteration
//! with stochastic gradients, and the named algorithm presets.

use ndarray::Array1;

use crate::error::Result;
use crate::estimators::{BatchSampler, Estimator, EstimatorKind, RestartCoin, TrackedErrors};
use crate::kernel::BregmanKernel;
use crate::point::{extrapolate, sq_dist, BlockPoint, IterateWindow};
use crate::problems::{Block, Problem};

mod config;
mod stepsize;
mod subproblem;

pub use config::{preset, Coefficients, Preset, Schedules, SolverConfig};
pub use stepsize::{check_config, stepsize_bound, validate_stepsize, variance_term, StepsizeCheck, StepsizeVerdict};
pub use subproblem::{solve_block, solve_x_subproblem, solve_y_subproblem};

/// Smallest kernel scale used when an adaptive Lipschitz estimate vanishes.
const MIN_SCALE: f64 = 1e-12;

/// What one step did, kept for diagnostics of the following iterate.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub k: usize,
    pub coin: RestartCoin,
    pub coefficients: Coefficients,
    /// Linear-term coefficients actually used: `[a1, a2, b1, b2]`.
    pub linear: [f64; 4],
    pub kernel_x: BregmanKernel,
    pub kernel_y: BregmanKernel,
    /// Extrapolated points `u_k` and `v_k`.
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    /// `∇̃_x(u_k, y_k)` and `∇̃_y(x_{k+1}, v_k)`.
    pub grad_x: Array1<f64>,
    pub grad_y: Array1<f64>,
    /// Realized squared estimator errors `[x, y]` (diagnostics only).
    pub sq_error: Option<[f64; 2]>,
    /// `‖z_{k+1} − z_k‖²` followed by the three older consecutive distances.
    pub dist_sq: [f64; 4],
}

pub struct Solver<'a> {
    problem: &'a dyn Problem,
    config: SolverConfig,
    window: IterateWindow,
    estimator: Estimator,
    sampler: BatchSampler,
    k: usize,
    kernel_x: BregmanKernel,
    kernel_y: BregmanKernel,
    last: Option<StepTrace>,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a dyn Problem, config: SolverConfig, z0: BlockPoint) -> Result<Self> {
        let estimator = Estimator::new(config.estimator, problem, &z0, config.seed)?;
        Self::with_estimator(problem, config, z0, estimator)
    }

    /// Starts from `z0` with an estimator whose anchors may lie elsewhere.
    pub fn with_estimator(
        problem: &'a dyn Problem,
        config: SolverConfig,
        z0: BlockPoint,
        estimator: Estimator,
    ) -> Result<Self> {
        config.validate()?;
        crate::problems::check_point(problem, z0.x.view(), z0.y.view())?;
        let n = problem.n_components();
        let b = if config.estimator.kind.is_stochastic() { config.estimator.batch_size } else { n };
        let sampler = BatchSampler::new(n, b, config.seed)?;
        Ok(Self {
            problem,
            kernel_x: config.kernel_x,
            kernel_y: config.kernel_y,
            config,
            window: IterateWindow::new(z0),
            estimator,
            sampler,
            k: 0,
            last: None,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn problem(&self) -> &'a dyn Problem {
        self.problem
    }

    /// Number of completed steps.
    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn epochs(&self) -> f64 {
        self.estimator.epochs()
    }

    pub fn window(&self) -> &IterateWindow {
        &self.window
    }

    pub fn current(&self) -> &BlockPoint {
        self.window.current()
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn kernels(&self) -> (&BregmanKernel, &BregmanKernel) {
        (&self.kernel_x, &self.kernel_y)
    }

    pub fn last_trace(&self) -> Option<&StepTrace> {
        self.last.as_ref()
    }

    /// `u_k` and `v_k` of the next step.
    pub fn next_extrapolation(&self) -> Result<(Array1<f64>, Array1<f64>)> {
        let c = self.config.schedules.coefficients(self.k);
        let w = &self.window;
        let u = extrapolate(w.get(0).x.view(), w.get(1).x.view(), w.get(2).x.view(), c.gamma1, c.gamma2)?;
        let v = extrapolate(w.get(0).y.view(), w.get(1).y.view(), w.get(2).y.view(), c.mu1, c.mu2)?;
        Ok((u, v))
    }

    /// `Υ_k`, `Γ_k` of the next step, without changing any state.
    pub fn tracked_errors(&self) -> Result<TrackedErrors> {
        let (u, v) = self.next_extrapolation()?;
        let z = self.current();
        self.estimator.tracked(self.problem, u.view(), z.y.view(), z.x.view(), v.view())
    }

    fn adapt(&self, kernel: &BregmanKernel, block: Block, point: &BlockPoint) -> Result<BregmanKernel> {
        if !self.config.adaptive_theta {
            return Ok(*kernel);
        }
        let l = self.problem.partial_lipschitz(block, point)?;
        kernel.with_scale((self.config.safety_factor * l).max(MIN_SCALE))
    }

    /// One full x-then-y update.
    pub fn step(&mut self) -> Result<&StepTrace> {
        let k = self.k;
        self.step_inner().map_err(|e| e.at_iteration(k))?;
        Ok(self.last.as_ref().expect("trace just stored"))
    }

    fn step_inner(&mut self) -> Result<()> {
        let k = self.k;
        let p = self.problem;
        let coin = self.estimator.begin_iteration()?;
        let c = self.config.schedules.coefficients(k);
        let (u, v) = self.next_extrapolation()?;
        let zk = self.window.current().clone();

        self.kernel_x = self.adapt(&self.kernel_x, Block::X, &zk)?;
        let scale_x = if self.config.scale_linear_terms { self.kernel_x.scale() } else { 1.0 };
        let (a1, a2) = (c.alpha1 * scale_x, c.alpha2 * scale_x);
        let batch = self.sampler.sample();
        let grad_x = self.estimator.estimate_x(p, u.view(), zk.y.view(), &batch)?;
        let x_next = solve_x_subproblem(p, grad_x.view(), &self.window, &self.kernel_x, a1, a2)?;

        let mid = BlockPoint { x: x_next, y: zk.y.clone() };
        self.kernel_y = self.adapt(&self.kernel_y, Block::Y, &mid)?;
        let scale_y = if self.config.scale_linear_terms { self.kernel_y.scale() } else { 1.0 };
        let (b1, b2) = (c.beta1 * scale_y, c.beta2 * scale_y);
        let batch = self.sampler.sample();
        let grad_y = self.estimator.estimate_y(p, mid.x.view(), v.view(), &batch)?;
        let y_next = solve_y_subproblem(p, grad_y.view(), &self.window, &self.kernel_y, b1, b2)?;

        let sq_error = if self.config.diagnostics && self.estimator.kind() != EstimatorKind::Full {
            let ex = sq_dist(grad_x.view(), p.full_grad_x(u.view(), zk.y.view())?.view());
            let ey = sq_dist(grad_y.view(), p.full_grad_y(mid.x.view(), v.view())?.view());
            self.estimator.observe_error(ex, ey);
            Some([ex, ey])
        } else if self.config.diagnostics {
            Some([0.0, 0.0])
        } else {
            None
        };

        let z_next = BlockPoint::new(mid.x, y_next)?;
        let older = self.window.displacements_sq();
        let dist_sq = [z_next.dist_sq(&zk), older[0], older[1], older[2]];
        self.window.push(z_next);
        self.k += 1;
        self.last = Some(StepTrace {
            k,
            coin,
            coefficients: c,
            linear: [a1, a2, b1, b2],
            kernel_x: self.kernel_x,
            kernel_y: self.kernel_y,
            u,
            v,
            grad_x,
            grad_y,
            sq_error,
            dist_sq,
        });
        Ok(())
    }

    /// Steps until the epoch budget is spent.
    pub fn run_to_budget(&mut self, mut observe: impl FnMut(&Solver<'a>) -> Result<()>) -> Result<()> {
        while self.epochs() < self.config.max_epochs {
            self.step()?;
            observe(self)?;
        }
        Ok(())
    }
}
