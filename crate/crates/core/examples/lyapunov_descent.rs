//! Tracks the Lyapunov sequence `Ψ_k` and the stationarity residual of a
//! SAGA run whose kernel scales satisfy the step-size condition.

use anyhow::{ensure, Result};
use stibpalm::diagnostics::{observe_step, PsiConstants};
use stibpalm::estimators::{EstimatorConfig, SagaMode};
use stibpalm::harness::synthetic::planted_snmf;
use stibpalm::schedule::InertialSchedule;
use stibpalm::solvers::{check_config, preset, Preset, Schedules, Solver, SolverConfig};
use stibpalm::{BregmanKernel, Problem, Snmf};

fn main() -> Result<()> {
    let problem = Snmf::new(planted_snmf(20, 15, 5, 0.25, 0.01, 61)?.snmf_config(3.0))?;
    let z0 = problem.initial_point(0);
    let mut cfg = preset(
        Preset::StiBPalm,
        &SolverConfig { estimator: EstimatorConfig::saga(5, SagaMode::Literal), max_epochs: 50.0, ..SolverConfig::default() },
    );
    cfg.schedules = Schedules::all(InertialSchedule::Constant(0.1));
    cfg.adaptive_theta = false;

    let l = 2.0 * problem.lipschitz_hint(&z0, false)?.n;
    let bound = check_config(&problem, &cfg, &z0, Some(l))?.bound;
    cfg.kernel_x = BregmanKernel::quadratic(1.05 * bound)?;
    cfg.kernel_y = BregmanKernel::quadratic(1.05 * bound)?;
    let check = check_config(&problem, &cfg, &z0, Some(l))?;
    ensure!(check.verdict.is_satisfied(), "step-size condition fails: {:?}", check.verdict);
    println!("theta {:.4e} against bound {:.4e}", check.theta.0, check.bound);

    let consts = PsiConstants::new(check.l, check.theta.0, check.alphas, check.gammas, &check.vr, cfg.epsilon)?;
    let mut solver = Solver::new(&problem, cfg, z0)?;
    let mut increases = 0;
    let mut prev = f64::INFINITY;
    solver.run_to_budget(|s| {
        let d = observe_step(s, Some(&consts))?;
        let psi = d.psi.unwrap_or(f64::NAN);
        if psi > prev {
            increases += 1;
        }
        prev = psi;
        if s.iteration() % 25 == 0 {
            println!(
                "iter {:>4}  psi {:.6}  objective {:.6}  stationarity {:.3e}",
                s.iteration(),
                psi,
                problem.objective(s.current()).value,
                d.stationarity.unwrap_or(f64::NAN)
            );
        }
        Ok(())
    })?;
    println!("{} steps, psi increased in {increases}", solver.iteration());
    Ok(())
}
