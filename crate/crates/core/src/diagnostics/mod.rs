//! Certificate quantities along a run: the Lyapunov sequence `Ψ_k`, the
//! subgradient residual, and statistical checks on seed-averaged records.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, VRConstants};
use crate::point::IterateWindow;
use crate::problems::Problem;
use crate::solvers::{variance_term, Solver, StepTrace};

mod frozen;
mod stats;

pub use frozen::{frozen_battery, FrozenBattery, FrozenRun};
pub use stats::{
    bootstrap_se, check_mse_bound, fit_decay_rate, fit_linear_rate, psi_descent, seed_mean, summability,
    MseRecord, MseReport, PsiDescent, Summability,
};

/// Constants of the Lyapunov sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiConstants {
    pub lambda: f64,
    pub z: f64,
    pub epsilon: f64,
    pub kappa: f64,
    l: f64,
    rho: f64,
    /// `V1 + V_Υ/ρ`.
    v_sum: f64,
    alphas: (f64, f64),
    gammas: (f64, f64),
}

impl PsiConstants {
    pub fn new(
        l: f64,
        theta: f64,
        alphas: (f64, f64),
        gammas: (f64, f64),
        vr: &VRConstants,
        epsilon: f64,
    ) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz bound must be positive, got {l}")));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        let q = variance_term(l, gammas.0, gammas.1, vr)?;
        let v_sum = vr.v1 + vr.v_upsilon / vr.rho;
        let (lambda, z) = if q > 0.0 { (q / l, v_sum / q + epsilon) } else { (0.0, epsilon) };
        let kappa = -(l - theta) / 2.0 - alphas.0 - alphas.1 - q - 3.0 * epsilon;
        Ok(Self { lambda, z, epsilon, kappa, l, rho: vr.rho, v_sum, alphas, gammas })
    }

    /// Weights of `Υ_k` and of the three displacement terms.
    ///
    /// When `λ = 0` every term with `λ` in the denominator has a zero
    /// numerator and is taken to be zero.
    pub fn coefficients(&self) -> [f64; 4] {
        let (a1, a2) = self.alphas;
        let (g1, g2) = self.gammas;
        let over = |num: f64| if self.lambda > 0.0 { num / self.lambda } else { 0.0 };
        let shared = over(self.v_sum / self.l);
        [
            over(1.0 / (self.l * self.rho)),
            shared + (a1 + a2) / 2.0 + over(2.0 * self.l * (g1 * g1 + g2 * g2)) + 3.0 * self.z,
            shared + a2 / 2.0 + over(2.0 * self.l * g2 * g2) + 2.0 * self.z,
            shared + self.z,
        ]
    }

    pub fn is_descent(&self) -> bool {
        self.kappa > 0.0
    }
}

/// `Ψ_k` from the objective value, `Υ_k` and the squared displacements
/// `[‖z_k − z_{k−1}‖², ‖z_{k−1} − z_{k−2}‖², ‖z_{k−2} − z_{k−3}‖²]`.
pub fn compute_psi(phi_value: f64, upsilon: f64, displacements: [f64; 3], consts: &PsiConstants) -> Result<f64> {
    if consts.lambda == 0.0 && upsilon != 0.0 {
        return Err(Error::InvalidParameter(format!("Υ = {upsilon} with a vanishing λ")));
    }
    let c = consts.coefficients();
    Ok(phi_value + c[0] * upsilon + c[1] * displacements[0] + c[2] * displacements[1] + c[3] * displacements[2])
}

/// `Ψ_k` of the solver's current state, with `Υ_k` from its estimator.
pub fn solver_psi(solver: &Solver<'_>, consts: &PsiConstants) -> Result<f64> {
    let upsilon = match solver.estimator().kind() {
        EstimatorKind::Full => 0.0,
        _ => solver.tracked_errors()?.upsilon,
    };
    let phi = solver.problem().objective(solver.current()).value;
    compute_psi(phi, upsilon, solver.window().displacements_sq(), consts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityRecord {
    pub ax_norm: f64,
    pub ay_norm: f64,
    pub combined: f64,
}

/// Norms of the subgradient residuals `A_x^k`, `A_y^k` at the newest iterate
/// of `window`, given the trace of the step that produced it.
pub fn stationarity_residual(
    problem: &dyn Problem,
    window: &IterateWindow,
    trace: Option<&StepTrace>,
) -> Result<StationarityRecord> {
    let t = trace.ok_or(Error::MissingTrace)?;
    let [z0, z1, z2, z3] = [window.get(0), window.get(1), window.get(2), window.get(3)];
    let [a1, a2, b1, b2] = t.linear;

    let mut ax: Array1<f64> = problem.full_grad_x(z0.x.view(), z0.y.view())?;
    ax -= &t.grad_x;
    ax += &t.kernel_x.gradient(z1.x.view())?;
    ax -= &t.kernel_x.gradient(z0.x.view())?;
    ax.scaled_add(a1, &(&z1.x - &z2.x));
    ax.scaled_add(a2, &(&z2.x - &z3.x));

    let mut ay: Array1<f64> = problem.full_grad_y(z0.x.view(), z0.y.view())?;
    ay -= &t.grad_y;
    ay += &t.kernel_y.gradient(z1.y.view())?;
    ay -= &t.kernel_y.gradient(z0.y.view())?;
    ay.scaled_add(b1, &(&z1.y - &z2.y));
    ay.scaled_add(b2, &(&z2.y - &z3.y));

    let (ax_norm, ay_norm) = (ax.dot(&ax).sqrt(), ay.dot(&ay).sqrt());
    Ok(StationarityRecord { ax_norm, ay_norm, combined: ax_norm.hypot(ay_norm) })
}

/// Diagnostics of one completed step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub psi: Option<f64>,
    pub stationarity: Option<f64>,
    pub upsilon: Option<f64>,
    /// Realized squared estimator error of the step.
    pub sq_error: Option<f64>,
}

/// Gathers the per-step diagnostics after `solver.step()`. `Ψ_k` needs
/// constants; the other fields need only the solver.
pub fn observe_step(solver: &Solver<'_>, consts: Option<&PsiConstants>) -> Result<StepDiagnostics> {
    let upsilon = match solver.estimator().kind() {
        EstimatorKind::Full => 0.0,
        _ => solver.tracked_errors()?.upsilon,
    };
    let psi = match consts {
        Some(c) => {
            let phi = solver.problem().objective(solver.current()).value;
            Some(compute_psi(phi, upsilon, solver.window().displacements_sq(), c)?)
        }
        None => None,
    };
    let stationarity = stationarity_residual(solver.problem(), solver.window(), solver.last_trace())?.combined;
    let sq_error = solver.last_trace().and_then(|t| t.sq_error).map(|[ex, ey]| ex + ey);
    Ok(StepDiagnostics { psi, stationarity: Some(stationarity), upsilon: Some(upsilon), sq_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorConfig;
    use crate::point::BlockPoint;
    use crate::problems::{Snmf, SnmfConfig};
    use crate::solvers::{preset, Preset, SolverConfig};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snmf(rows: usize, cols: usize, rank: usize, seed: u64) -> Snmf {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0.0..1.0));
        Snmf::new(SnmfConfig { a, rank, sparsity: rows, eta_fit: 1.0 }).unwrap()
    }

    fn window(points: [f64; 4]) -> IterateWindow {
        let mk = |v: f64| BlockPoint { x: Array1::from_elem(2, v), y: Array1::from_elem(1, v) };
        let mut w = IterateWindow::new(mk(points[3]));
        for &v in points[..3].iter().rev() {
            w.push(mk(v));
        }
        w
    }

    #[test]
    fn exact_psi_reduces_to_epsilon_weights() {
        let eps = 0.01;
        let c = PsiConstants::new(2.0, 3.0, (0.0, 0.0), (0.0, 0.0), &VRConstants::EXACT, eps).unwrap();
        assert_eq!(c.lambda, 0.0);
        assert_eq!(c.z, eps);
        let psi = compute_psi(5.0, 0.0, [1.0, 2.0, 3.0], &c).unwrap();
        assert!((psi - (5.0 + 3.0 * eps + 4.0 * eps + 3.0 * eps)).abs() < 1e-15);
    }

    #[test]
    fn equal_window_gives_the_objective() {
        let vr = VRConstants { v1: 0.4, v2: 0.2, v_upsilon: 0.3, rho: 0.5 };
        let c = PsiConstants::new(1.0, 10.0, (0.1, 0.2), (0.3, 0.1), &vr, 1e-3).unwrap();
        let w = window([1.0; 4]);
        assert_eq!(compute_psi(7.25, 0.0, w.displacements_sq(), &c).unwrap(), 7.25);
    }

    #[test]
    fn hand_evaluated_coefficients() {
        let vr = VRConstants { v1: 1.0, v2: 0.0, v_upsilon: 0.0, rho: 1.0 };
        let c = PsiConstants::new(1.0, 20.0, (0.2, 0.3), (0.0, 0.0), &vr, 0.0).unwrap();
        let s10 = 10f64.sqrt();
        assert!((c.lambda - s10).abs() < 1e-15);
        assert!((c.z - 1.0 / s10).abs() < 1e-15);
        let k = c.coefficients();
        let expect = [1.0 / s10, 1.0 / s10 + 0.25 + 3.0 / s10, 1.0 / s10 + 0.15 + 2.0 / s10, 2.0 / s10];
        for (a, b) in k.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert!((c.kappa - (9.5 - 0.5 - s10)).abs() < 1e-14);
    }

    #[test]
    fn hand_evaluated_coefficients_with_inertia() {
        let vr = VRConstants { v1: 0.5, v2: 0.0, v_upsilon: 0.25, rho: 0.5 };
        let (l, g1, g2) = (2.0, 0.3, 0.2);
        let c = PsiConstants::new(l, 50.0, (0.1, 0.05), (g1, g2), &vr, 0.01).unwrap();
        let q = (10.0f64 * 1.0 + 4.0 * 4.0 * (0.09 + 0.04)).sqrt();
        let lam = q / l;
        let z = 1.0 / q + 0.01;
        let shared = 1.0 / (l * lam);
        let k = c.coefficients();
        assert!((k[0] - 1.0 / (l * lam * 0.5)).abs() < 1e-14);
        assert!((k[1] - (shared + 0.075 + 2.0 * l * 0.13 / lam + 3.0 * z)).abs() < 1e-14);
        assert!((k[2] - (shared + 0.025 + 2.0 * l * 0.04 / lam + 2.0 * z)).abs() < 1e-14);
        assert!((k[3] - (shared + z)).abs() < 1e-14);
    }

    #[test]
    fn upsilon_without_lambda_is_an_error() {
        let c = PsiConstants::new(1.0, 3.0, (0.0, 0.0), (0.0, 0.0), &VRConstants::EXACT, 0.1).unwrap();
        assert!(compute_psi(1.0, 0.5, [0.0; 3], &c).is_err());
    }

    #[test]
    fn residual_needs_a_trace() {
        let p = snmf(4, 3, 2, 1);
        let w = IterateWindow::new(p.initial_point(0));
        assert!(matches!(stationarity_residual(&p, &w, None), Err(Error::MissingTrace)));
    }

    #[test]
    fn palm_residual_matches_the_direct_formula() {
        let p = snmf(8, 6, 3, 2);
        let cfg = preset(Preset::Palm, &SolverConfig { safety_factor: 1.2, ..SolverConfig::default() });
        let mut s = Solver::new(&p, cfg, p.initial_point(3)).unwrap();
        for _ in 0..4 {
            s.step().unwrap();
        }
        let r = stationarity_residual(&p, s.window(), s.last_trace()).unwrap();
        let (zk, zp) = (s.window().get(0), s.window().get(1));
        let theta = s.last_trace().unwrap().kernel_x.scale();
        let mut ax = p.full_grad_x(zk.x.view(), zk.y.view()).unwrap() - p.full_grad_x(zp.x.view(), zp.y.view()).unwrap();
        ax.scaled_add(theta, &(&zp.x - &zk.x));
        assert!((r.ax_norm - ax.dot(&ax).sqrt()).abs() < 1e-10 * (1.0 + r.ax_norm));
        assert!((r.combined - r.ax_norm.hypot(r.ay_norm)).abs() < 1e-15);
    }

    #[test]
    fn residual_vanishes_at_a_fixed_point() {
        let p = snmf(6, 5, 2, 3);
        let cfg = preset(Preset::Palm, &SolverConfig { safety_factor: 1.2, ..SolverConfig::default() });
        let mut s = Solver::new(&p, cfg, p.initial_point(1)).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..20_000 {
            s.step().unwrap();
            last = stationarity_residual(&p, s.window(), s.last_trace()).unwrap().combined;
            if last < 1e-7 {
                break;
            }
        }
        assert!(last < 1e-6, "residual {last}");
    }

    #[test]
    fn observe_step_fills_every_field_with_diagnostics_on() {
        let p = snmf(10, 6, 2, 5);
        let base = SolverConfig {
            estimator: EstimatorConfig::sarah(2, 0.2),
            diagnostics: true,
            safety_factor: 4.0,
            ..SolverConfig::default()
        };
        let cfg = preset(Preset::Spring, &base);
        let mut s = Solver::new(&p, cfg, p.initial_point(0)).unwrap();
        let c = PsiConstants::new(10.0, 100.0, (0.0, 0.0), (0.0, 0.0), &VRConstants::EXACT, 1e-3).unwrap();
        s.step().unwrap();
        // the first SARAH step uses the exact gradient
        let d = observe_step(&s, None).unwrap();
        assert_eq!(d.sq_error, Some(0.0));
        assert!(d.stationarity.is_some() && d.psi.is_none());
        assert!(compute_psi(1.0, d.upsilon.unwrap(), [0.0; 3], &c).is_ok());
    }
}
