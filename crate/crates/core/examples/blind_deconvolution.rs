//! Recovers a synthetic image and its motion-blur kernel with STiBPALM-SARAH.
//! The blurred input, the estimate and the kernel are saved as PGM files.

use anyhow::Result;
use ndarray::Array2;
use stibpalm::estimators::EstimatorConfig;
use stibpalm::harness::io::save_pgm;
use stibpalm::harness::synthetic::{blur, motion_kernel, test_image};
use stibpalm::solvers::{preset, Preset, Solver, SolverConfig};
use stibpalm::{Bid, BidConfig, Problem};

fn main() -> Result<()> {
    let truth = test_image(64, 64);
    let kernel = motion_kernel(9, 30.0)?;
    let blurred = blur(&truth, &kernel, 0.005, 0)?;
    let problem = Bid::new(BidConfig::new(blurred.clone(), 9))?;

    let n = problem.n_components();
    let base = SolverConfig {
        estimator: EstimatorConfig::sarah((n / 20).max(1), 1.0 / 64.0),
        safety_factor: 4.0,
        max_epochs: 50.0,
        ..SolverConfig::default()
    };
    let z0 = problem.initial_point(0);
    let start = problem.objective(&z0).value;
    let mut solver = Solver::new(&problem, preset(Preset::StiBPalm, &base), z0)?;
    let mut next_report = 10.0;
    solver.run_to_budget(|s| {
        if s.epochs() >= next_report {
            println!("epoch {:>5.1}  objective {:.5}", s.epochs(), problem.objective(s.current()).value);
            next_report += 10.0;
        }
        Ok(())
    })?;

    let z = solver.current();
    let image = problem.x_view(z.x.view())?.to_owned();
    let k = problem.y_view(z.y.view())?.to_owned();
    let err = |a: &Array2<f64>| (a - &truth).mapv(|v| v * v).mean().unwrap_or(0.0).sqrt();
    println!("objective {start:.4} -> {:.4}", problem.objective(z).value);
    println!("rms error vs sharp image: blurred {:.4}, restored {:.4}", err(&blurred), err(&image));

    let dir = std::path::Path::new("target/examples/bid");
    std::fs::create_dir_all(dir)?;
    save_pgm(&dir.join("blurred.pgm"), &blurred)?;
    save_pgm(&dir.join("restored.pgm"), &image)?;
    let peak = k.iter().cloned().fold(0.0, f64::max).max(1e-12);
    save_pgm(&dir.join("kernel.pgm"), &(k / peak))?;
    println!("images written to {}", dir.display());
    Ok(())
}
