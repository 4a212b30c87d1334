//! Frozen-iterate checks of the gradient estimators: the iterate is held
//! fixed and the estimators are queried repeatedly, so the tracked error of
//! the variance-reduced ones should decay geometrically.

use anyhow::Result;
use stibpalm::diagnostics::{check_mse_bound, frozen_battery};
use stibpalm::estimators::{vr_constants, EstimatorConfig, EstimatorKind, SagaMode};
use stibpalm::harness::synthetic::planted_snmf;
use stibpalm::{Problem, Snmf};

fn main() -> Result<()> {
    let problem = Snmf::new(planted_snmf(50, 30, 5, 0.25, 0.01, 3)?.snmf_config(3.0))?;
    let (anchor, point) = (problem.initial_point(1), problem.initial_point(2));
    let (n, b) = (problem.n_components(), 5);
    let lip = problem.lipschitz_hint(&point, true)?.n;
    let seeds: Vec<u64> = (0..30).collect();

    for cfg in [EstimatorConfig::saga(b, SagaMode::Literal), EstimatorConfig::sarah(b, 0.125), EstimatorConfig::sgd(b)] {
        let bat = frozen_battery(&problem, cfg, &anchor, &point, &seeds, 200)?;
        print!("{:<6} fitted rate {:.4}", cfg.kind.name(), bat.rho_hat);
        match bat.steps_below(1e-10) {
            Some(k) => print!(", mean error below 1e-10 after {k} steps"),
            None => print!(", mean error stays above 1e-10"),
        }
        if cfg.kind != EstimatorKind::Sgd {
            let vr = vr_constants(cfg.kind, lip, 0.0, 0.0, b, n, cfg.sarah_p())?;
            let mse = check_mse_bound(cfg.kind, &bat.records(), &vr)?;
            print!(", theory rate {:.4}, bound violated in {:.1}% of steps", vr.rho, 100.0 * mse.violation_rate);
        }
        println!();
    }
    Ok(())
}
