//! Runs an experiment described by a JSON config, by default
//! `examples/configs/snmf_small.json`, and writes the report.
//!
//! ```text
//! cargo run --example experiment_from_config -- path/to/config.json
//! ```

use std::path::PathBuf;

use anyhow::{Context, Result};
use stibpalm::harness::{emit_report, run_experiment, summarize, ExperimentConfig, StepsizeFlag};

fn main() -> Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/snmf_small.json"));
    let cfg = ExperimentConfig::load(&path, false).with_context(|| format!("loading {}", path.display()))?;
    let runs = run_experiment(&cfg)?;
    for r in &runs {
        let flag = match &r.stepsize {
            StepsizeFlag::Satisfied { margin } => format!("satisfied ({margin:.3e})"),
            StepsizeFlag::Violated { margin } => format!("violated ({margin:.3e})"),
            StepsizeFlag::Unavailable { .. } => "not checked".to_string(),
        };
        println!("{:<28} final {:.5}  step-size {flag}", r.run_id, r.final_objective());
    }
    for a in summarize(&runs).algorithms {
        println!("{:<16} mean {:.5} over {} runs", a.algorithm, a.mean_final_objective, a.runs);
    }
    let files = emit_report(&runs, &cfg.output_dir, cfg.log_y)?;
    println!("metrics in {}", files.metrics.display());
    Ok(())
}
