//! Quadratic and quartic Bregman kernels: their distances, and TiPALM
//! against its quartic-kernel variant BTiPALM on a small factorization.

use anyhow::Result;
use ndarray::array;
use stibpalm::harness::synthetic::planted_snmf;
use stibpalm::solvers::{preset, Preset, Solver, SolverConfig};
use stibpalm::{BregmanKernel, Problem, Snmf};

fn main() -> Result<()> {
    let (x, y) = (array![1.0, 2.0], array![0.5, 0.0]);
    for k in [BregmanKernel::quadratic(2.0)?, BregmanKernel::quartic(2.0)?] {
        println!("{:?} kernel: D(x, y) = {:.4}, D(y, x) = {:.4}", k.kind(), k.distance(x.view(), y.view())?, k.distance(y.view(), x.view())?);
    }

    let problem = Snmf::new(planted_snmf(40, 30, 5, 0.25, 0.01, 5)?.snmf_config(3.0))?;
    for p in [Preset::TiPalm, Preset::BTiPalm] {
        let cfg = SolverConfig { max_epochs: 40.0, safety_factor: 1.5, ..preset(p, &SolverConfig::default()) };
        let z0 = problem.initial_point(0);
        let mut s = Solver::new(&problem, cfg, z0.clone())?;
        s.run_to_budget(|_| Ok(()))?;
        println!(
            "{:<8} objective {:.4} -> {:.4} in {} iterations",
            p.name(),
            problem.objective(&z0).value,
            problem.objective(s.current()).value,
            s.iteration()
        );
    }
    Ok(())
}
