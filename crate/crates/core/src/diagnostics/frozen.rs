use serde::{Deserialize, Serialize};

use super::stats::{fit_decay_rate, seed_mean, MseRecord};
use crate::error::{Error, Result};
use crate::estimators::{BatchSampler, Estimator, EstimatorConfig, EstimatorKind, RestartCoin};
use crate::point::{sq_dist, BlockPoint};
use crate::problems::Problem;

/// One seed of a frozen-iterate run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrozenRun {
    pub seed: u64,
    /// `Υ_k`: the anchor sum before step `k` for SAGA, the realized error of
    /// step `k` for SARAH and SGD.
    pub upsilon: Vec<f64>,
    pub records: Vec<MseRecord>,
    /// First step whose SARAH coin came up `FullRefresh`.
    pub first_refresh: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrozenBattery {
    pub kind: EstimatorKind,
    pub runs: Vec<FrozenRun>,
    pub mean_upsilon: Vec<f64>,
    pub rho_hat: f64,
}

impl FrozenBattery {
    pub fn upsilon_series(&self) -> Vec<Vec<f64>> {
        self.runs.iter().map(|r| r.upsilon.clone()).collect()
    }

    pub fn records(&self) -> Vec<Vec<MseRecord>> {
        self.runs.iter().map(|r| r.records.clone()).collect()
    }

    /// First step at which the seed-averaged `Υ` drops below `tol`.
    pub fn steps_below(&self, tol: f64) -> Option<usize> {
        self.mean_upsilon.iter().position(|&v| v < tol)
    }
}

/// Holds the iterate at `point` and repeatedly queries the estimator, whose
/// stored state (SAGA anchors, the SARAH running estimate) starts at
/// `anchor`.
pub fn frozen_battery(
    problem: &dyn Problem,
    config: EstimatorConfig,
    anchor: &BlockPoint,
    point: &BlockPoint,
    seeds: &[u64],
    steps: usize,
) -> Result<FrozenBattery> {
    if seeds.is_empty() {
        return Err(Error::InsufficientSeeds { needed: 1, got: 0 });
    }
    let (x, y) = (point.x.view(), point.y.view());
    let exact_x = problem.full_grad_x(x, y)?;
    let exact_y = problem.full_grad_y(x, y)?;
    let n = problem.n_components();
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut est = Estimator::new(config, problem, anchor, seed)?;
        let b = if config.kind.is_stochastic() { config.batch_size } else { n };
        let mut sampler = BatchSampler::new(n, b, seed)?;
        if config.kind == EstimatorKind::Sarah {
            est.begin_iteration()?;
            let all: Vec<usize> = (0..n).collect();
            est.estimate_x(problem, anchor.x.view(), anchor.y.view(), &all)?;
            est.estimate_y(problem, anchor.x.view(), anchor.y.view(), &all)?;
        }
        let mut run = FrozenRun { seed, upsilon: Vec::with_capacity(steps), records: Vec::new(), first_refresh: None };
        for k in 0..steps {
            let before = est.tracked(problem, x, y, x, y)?.upsilon;
            let coin = est.begin_iteration()?;
            let gx = est.estimate_x(problem, x, y, &sampler.sample())?;
            let gy = est.estimate_y(problem, x, y, &sampler.sample())?;
            let ex = sq_dist(gx.view(), exact_x.view());
            let ey = sq_dist(gy.view(), exact_y.view());
            est.observe_error(ex, ey);
            if config.kind == EstimatorKind::Sarah && coin == RestartCoin::FullRefresh && run.first_refresh.is_none() {
                run.first_refresh = Some(k);
            }
            run.upsilon.push(match config.kind {
                EstimatorKind::Saga => before,
                EstimatorKind::Full => 0.0,
                _ => ex + ey,
            });
            run.records.push(MseRecord { sq_error: ex + ey, upsilon: before, dist_sq: [0.0; 4] });
        }
        runs.push(run);
    }
    let series: Vec<Vec<f64>> = runs.iter().map(|r| r.upsilon.clone()).collect();
    let mean_upsilon = seed_mean(&series);
    let rho_hat = if steps >= 20 { fit_decay_rate(&series)? } else { f64::NAN };
    Ok(FrozenBattery { kind: config.kind, runs, mean_upsilon, rho_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::SagaMode;
    use crate::problems::CoupledQuadratic;

    #[test]
    fn saga_literal_decays_to_zero() {
        let p = CoupledQuadratic::random(50, 3, 2, 0.1, 1).unwrap();
        let (anchor, point) = (p.initial_point(1), p.initial_point(2));
        let seeds: Vec<u64> = (0..10).collect();
        let bat = frozen_battery(&p, EstimatorConfig::saga(5, SagaMode::Literal), &anchor, &point, &seeds, 200).unwrap();
        assert!(bat.rho_hat >= 0.05, "rho {}", bat.rho_hat);
        assert!(bat.steps_below(1e-10).is_some());
    }

    #[test]
    fn sarah_refresh_zeroes_the_error() {
        let p = CoupledQuadratic::random(40, 3, 2, 0.1, 2).unwrap();
        let (anchor, point) = (p.initial_point(1), p.initial_point(2));
        let seeds: Vec<u64> = (0..8).collect();
        let bat = frozen_battery(&p, EstimatorConfig::sarah(4, 0.125), &anchor, &point, &seeds, 200).unwrap();
        for r in &bat.runs {
            let k = r.first_refresh.expect("a refresh within 200 steps");
            assert_eq!(r.upsilon[k], 0.0);
            assert!(r.upsilon[..k].iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn full_estimator_has_no_error() {
        let p = CoupledQuadratic::random(10, 2, 2, 0.1, 3).unwrap();
        let z = p.initial_point(0);
        let bat = frozen_battery(&p, EstimatorConfig::full(), &z, &p.initial_point(1), &[0, 1], 25).unwrap();
        assert!(bat.runs.iter().all(|r| r.records.iter().all(|m| m.sq_error == 0.0)));
        assert_eq!(bat.rho_hat, 1.0);
    }
}
