use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{observe_step, PsiConstants};
use crate::error::Result;
use crate::harness::config::{AlgorithmSpec, ExperimentConfig};
use crate::problems::Problem;
use crate::solvers::{check_config, Solver, SolverConfig, StepsizeCheck};

/// One iteration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: f64,
    pub iter: usize,
    pub wall_time_s: f64,
    pub objective: f64,
    pub feasible: bool,
    pub psi: Option<f64>,
    pub stationarity: Option<f64>,
    pub upsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { error: String },
}

/// Outcome of the step-size condition at the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StepsizeFlag {
    Satisfied { margin: f64 },
    Violated { margin: f64 },
    Unavailable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub algorithm: String,
    pub seed: u64,
    pub initial_objective: f64,
    pub status: RunStatus,
    pub stepsize: StepsizeFlag,
    pub records: Vec<MetricRecord>,
}

impl RunResult {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(self.initial_objective, |r| r.objective)
    }

    pub fn failed(&self) -> bool {
        matches!(self.status, RunStatus::Failed { .. })
    }
}

/// How a run's `Ψ_k` constants are obtained from the step-size check.
fn psi_constants(check: &StepsizeCheck, epsilon: f64) -> Option<PsiConstants> {
    let theta = check.theta.0.min(check.theta.1);
    PsiConstants::new(check.l, theta, check.alphas, check.gammas, &check.vr, epsilon).ok()
}

/// Step-size check of `alg` for `seed` at the problem's starting point.
pub fn stepsize_check(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    alg: &AlgorithmSpec,
    seed: u64,
) -> Result<(SolverConfig, Result<StepsizeCheck>)> {
    let solver_cfg = cfg.solver_config(alg, problem.n_components(), seed)?;
    let z0 = problem.initial_point(seed);
    let check = check_config(problem, &solver_cfg, &z0, alg.lipschitz);
    Ok((solver_cfg, check))
}

fn run_one(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    alg: &AlgorithmSpec,
    seed: u64,
    run_id: String,
) -> RunResult {
    let z0 = problem.initial_point(seed);
    let mut result = RunResult {
        run_id,
        algorithm: alg.label(),
        seed,
        initial_objective: problem.objective(&z0).value,
        status: RunStatus::Completed,
        stepsize: StepsizeFlag::Unavailable { reason: String::new() },
        records: Vec::new(),
    };
    let (solver_cfg, check) = match stepsize_check(cfg, problem, alg, seed) {
        Ok(v) => v,
        Err(e) => {
            result.status = RunStatus::Failed { error: e.to_string() };
            return result;
        }
    };
    let consts = match &check {
        Ok(c) => {
            result.stepsize = if c.verdict.is_satisfied() {
                StepsizeFlag::Satisfied { margin: c.verdict.margin() }
            } else {
                StepsizeFlag::Violated { margin: c.verdict.margin() }
            };
            psi_constants(c, cfg.epsilon)
        }
        Err(e) => {
            result.stepsize = StepsizeFlag::Unavailable { reason: e.to_string() };
            None
        }
    };
    if let StepsizeFlag::Violated { margin } = result.stepsize {
        if cfg.strict {
            result.status = RunStatus::Failed { error: format!("step-size condition violated, margin {margin}") };
            return result;
        }
        log::warn!("{}: step-size condition violated at the start, margin {margin:.6}", result.run_id);
    }

    let mut solver = match Solver::new(problem, solver_cfg, z0) {
        Ok(s) => s,
        Err(e) => {
            result.status = RunStatus::Failed { error: e.to_string() };
            return result;
        }
    };
    let start = Instant::now();
    let records = &mut result.records;
    let outcome = solver.run_to_budget(|s| {
        let obj = problem.objective(s.current());
        let mut rec = MetricRecord {
            epoch: s.epochs(),
            iter: s.iteration(),
            wall_time_s: start.elapsed().as_secs_f64(),
            objective: obj.value,
            feasible: obj.feasible,
            psi: None,
            stationarity: None,
            upsilon: None,
        };
        if cfg.diagnostics && s.iteration() % cfg.diagnostics_every == 0 {
            let d = observe_step(s, consts.as_ref())?;
            rec.psi = d.psi;
            rec.stationarity = d.stationarity;
            rec.upsilon = d.upsilon;
        }
        records.push(rec);
        Ok(())
    });
    if let Err(e) = outcome {
        log::warn!("{}: {e}", result.run_id);
        result.status = RunStatus::Failed { error: e.to_string() };
    }
    result
}

/// Runs every (algorithm, seed) pair on a worker pool. Results come back in
/// job order, so the output does not depend on the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let problem = cfg.build_problem()?;
    Ok(run_on(cfg, problem.as_ref()))
}

/// As [`run_experiment`] for an already-built problem.
pub fn run_on(cfg: &ExperimentConfig, problem: &dyn Problem) -> Vec<RunResult> {
    let jobs: Vec<(usize, &AlgorithmSpec, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .enumerate()
        .map(|(i, (a, s))| (i, a, s))
        .collect();
    jobs.into_par_iter()
        .map(|(idx, alg, seed)| run_one(cfg, problem, alg, seed, format!("{idx:03}-{}-s{seed}", alg.label())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ProblemSpec;
    use crate::solvers::Preset;

    fn config(algs: Vec<AlgorithmSpec>, seeds: Vec<u64>) -> ExperimentConfig {
        let problem = ProblemSpec::Synthetic {
            rows: 20,
            cols: 15,
            rank: 5,
            nonzero_fraction: 0.25,
            noise: 0.01,
            seed: 3,
            eta: 3.0,
        };
        ExperimentConfig::new(problem, algs, 3.0, seeds)
    }

    #[test]
    fn palm_objective_is_monotone() {
        let mut alg = AlgorithmSpec::new(Preset::Palm);
        alg.safety_factor = Some(1.01);
        let mut cfg = config(vec![alg], vec![1]);
        cfg.epochs = 40.0;
        let runs = run_experiment(&cfg).unwrap();
        let r = &runs[0];
        assert_eq!(r.status, RunStatus::Completed);
        assert_eq!(r.records.len(), 40);
        let mut prev = r.initial_objective;
        for rec in &r.records {
            assert!(rec.objective <= prev, "{} > {prev}", rec.objective);
            prev = rec.objective;
        }
    }

    #[test]
    fn run_ids_and_determinism() {
        let algs = vec![AlgorithmSpec::new(Preset::Palm), AlgorithmSpec::new(Preset::StiBPalm)];
        let mut cfg = config(algs, vec![4, 5]);
        cfg.diagnostics = true;
        cfg.algorithms[1].safety_factor = Some(5.0);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let ids: Vec<&str> = a.iter().map(|r| r.run_id.as_str()).collect();
        assert_eq!(ids, ["000-PALM-s4", "001-PALM-s5", "002-STiBPALM-SARAH-s4", "003-STiBPALM-SARAH-s5"]);
        for (x, y) in a.iter().zip(&b) {
            let strip = |r: &RunResult| r.records.iter().map(|m| (m.objective, m.psi, m.upsilon)).collect::<Vec<_>>();
            assert_eq!(strip(x), strip(y));
        }
        assert!(a[2].records.iter().all(|m| m.stationarity.is_some()));
    }

    #[test]
    fn strict_mode_refuses_violations() {
        let mut alg = AlgorithmSpec::new(Preset::Palm);
        alg.theta = Some([1e-3, 1e-3]);
        let mut cfg = config(vec![alg], vec![0]);
        cfg.strict = true;
        let r = &run_experiment(&cfg).unwrap()[0];
        assert!(matches!(r.stepsize, StepsizeFlag::Violated { .. }));
        assert!(r.failed() && r.records.is_empty());
    }
}
