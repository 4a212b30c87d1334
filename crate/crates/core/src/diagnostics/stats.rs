use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, VRConstants};

const BOOTSTRAP_RESAMPLES: usize = 400;
const BOOTSTRAP_SEED: u64 = 0x5eed;
const MIN_SEEDS: usize = 5;
const ROUNDING_SLACK: f64 = 1e-12;

/// Bootstrap standard error of the mean of `values`, with a fixed resampling
/// stream so reports are reproducible.
pub fn bootstrap_se(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
}

/// Pointwise mean over seeds, truncated to the shortest series.
pub fn seed_mean(series: &[Vec<f64>]) -> Vec<f64> {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|k| series.iter().map(|s| s[k]).sum::<f64>() / series.len() as f64).collect()
}

/// Least-squares slope of `ln y` against `k` over the positive entries.
fn log_slope(values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        values.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(k, v)| (k as f64, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Geometric rate `ρ̂ = 1 − exp(slope)` of the seed-averaged `Υ` series.
///
/// Nonpositive averages are left out of the fit. A series that is zero
/// everywhere, or has a single positive point, counts as instant decay.
pub fn fit_decay_rate(upsilon: &[Vec<f64>]) -> Result<f64> {
    let mean = seed_mean(upsilon);
    if mean.len() < 20 {
        return Err(Error::InvalidParameter(format!("need at least 20 steps to fit a decay rate, got {}", mean.len())));
    }
    Ok(match log_slope(&mean) {
        Some(slope) => 1.0 - slope.exp(),
        None => 1.0,
    })
}

/// Linear-rate factor `τ = exp(slope)` of a distance-to-limit sequence.
pub fn fit_linear_rate(distances: &[f64]) -> Result<f64> {
    log_slope(distances)
        .map(f64::exp)
        .ok_or_else(|| Error::InvalidParameter("need two positive distances to fit a rate".into()))
}

/// One step of a diagnostics-enabled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    pub sq_error: f64,
    pub upsilon: f64,
    /// `‖z_{k+1} − z_k‖²` and the three older consecutive distances.
    pub dist_sq: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub violation_rate: f64,
    /// Largest seed-mean excess over the bound beyond the slack.
    pub max_excess: f64,
    pub steps: usize,
    /// Whether the estimator satisfies the bound as a variance-reduced one.
    pub conforming: bool,
}

/// Compares the seed-averaged realized error with the seed-averaged bound
/// `Υ_k + V1 Σ dist²` at every step, allowing three bootstrap standard errors.
/// Excesses below `1e-12` times the largest seed-mean error of the run are
/// treated as rounding: a synchronized estimator reports `Υ = 0` exactly while
/// its realized error is only zero up to summation order.
pub fn check_mse_bound(kind: EstimatorKind, records: &[Vec<MseRecord>], vr: &VRConstants) -> Result<MseReport> {
    if records.len() < MIN_SEEDS {
        return Err(Error::InsufficientSeeds { needed: MIN_SEEDS, got: records.len() });
    }
    let steps = records.iter().map(Vec::len).min().unwrap_or(0);
    if steps == 0 {
        return Err(Error::InvalidParameter("no recorded steps".into()));
    }
    let scale = (0..steps)
        .map(|k| records.iter().map(|r| r[k].sq_error).sum::<f64>() / records.len() as f64)
        .fold(0.0, f64::max);
    let slack = ROUNDING_SLACK * scale;
    let mut violations = 0;
    let mut max_excess = 0.0f64;
    for k in 0..steps {
        let gaps: Vec<f64> = records
            .iter()
            .map(|r| {
                let m = r[k];
                m.sq_error - (m.upsilon + vr.v1 * m.dist_sq.iter().sum::<f64>())
            })
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let excess = mean - 3.0 * bootstrap_se(&gaps);
        if excess > slack {
            violations += 1;
            max_excess = max_excess.max(excess);
        }
    }
    let violation_rate = violations as f64 / steps as f64;
    Ok(MseReport {
        violation_rate,
        max_excess,
        steps,
        conforming: kind.is_variance_reduced() && violation_rate <= 0.05,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiDescent {
    pub steps: usize,
    /// Fraction of steps where the seed mean did not increase.
    pub nonincreasing_fraction: f64,
    /// Largest increase of the seed mean in units of its bootstrap SE.
    pub worst_increase_se: f64,
}

impl PsiDescent {
    pub fn holds(&self) -> bool {
        self.nonincreasing_fraction >= 0.95 && self.worst_increase_se <= 3.0
    }
}

/// Seed-averaged monotonicity of `Ψ_k`, one series per seed.
pub fn psi_descent(psi: &[Vec<f64>]) -> Result<PsiDescent> {
    if psi.len() < MIN_SEEDS {
        return Err(Error::InsufficientSeeds { needed: MIN_SEEDS, got: psi.len() });
    }
    let len = psi.iter().map(Vec::len).min().unwrap_or(0);
    if len < 2 {
        return Err(Error::InvalidParameter("need at least two Ψ values per seed".into()));
    }
    let mut ok = 0;
    let mut worst = 0.0f64;
    for k in 0..len - 1 {
        let d: Vec<f64> = psi.iter().map(|s| s[k + 1] - s[k]).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        if mean <= 0.0 {
            ok += 1;
        } else {
            let se = bootstrap_se(&d);
            worst = worst.max(if se > 0.0 { mean / se } else { f64::INFINITY });
        }
    }
    Ok(PsiDescent { steps: len - 1, nonincreasing_fraction: ok as f64 / (len - 1) as f64, worst_increase_se: worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summability {
    pub total: f64,
    pub tail_fraction: f64,
}

/// Seed-averaged `Σ_k ‖z_{k+1} − z_k‖²` and the share of it contributed by
/// the last quarter of the steps.
pub fn summability(step_sq: &[Vec<f64>]) -> Summability {
    let mean = seed_mean(step_sq);
    let total: f64 = mean.iter().sum();
    let tail: f64 = mean[mean.len() - mean.len() / 4..].iter().sum();
    Summability { total, tail_fraction: if total > 0.0 { tail / total } else { 0.0 } }
}
