//! Compares the deterministic and stochastic presets on a planted sparse
//! factorization and writes metrics and plots to `target/examples/snmf`.

use anyhow::Result;
use stibpalm::harness::{emit_report, run_on, summarize, AlgorithmSpec, ExperimentConfig, ProblemSpec};
use stibpalm::solvers::Preset;

fn main() -> Result<()> {
    let problem = ProblemSpec::Synthetic { rows: 100, cols: 80, rank: 10, nonzero_fraction: 0.25, noise: 0.01, seed: 71, eta: 3.0 };
    let mut algorithms: Vec<AlgorithmSpec> =
        [Preset::Palm, Preset::IPalm, Preset::TiPalm, Preset::Spring, Preset::StiBPalm].map(AlgorithmSpec::new).into();
    // stochastic steps need a larger kernel scale than the full-gradient ones
    for a in algorithms.iter_mut().filter(|a| a.preset.is_stochastic()) {
        a.safety_factor = Some(12.0);
    }
    let cfg = ExperimentConfig::new(problem, algorithms, 30.0, (0..5).collect());
    let built = cfg.build_problem()?;
    let runs = run_on(&cfg, built.as_ref());

    println!("{:<16} {:>14} {:>12}", "algorithm", "mean final", "std");
    for a in summarize(&runs).algorithms {
        println!("{:<16} {:>14.4} {:>12.4}", a.algorithm, a.mean_final_objective, a.std_final_objective);
    }
    let files = emit_report(&runs, "target/examples/snmf".as_ref(), true)?;
    println!("plots: {} and {}", files.plot_epoch.display(), files.plot_time.display());
    Ok(())
}
