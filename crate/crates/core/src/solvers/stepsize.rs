use crate::error::{Error, Result};
use crate::estimators::{vr_constants, EstimatorKind, VRConstants};
use crate::point::BlockPoint;
use crate::problems::{Block, Problem};

use super::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeVerdict {
    Satisfied { margin: f64 },
    Violated { margin: f64 },
}

impl StepsizeVerdict {
    /// `min(θ1, θ2) − R`.
    pub fn margin(&self) -> f64 {
        match *self {
            StepsizeVerdict::Satisfied { margin } | StepsizeVerdict::Violated { margin } => margin,
        }
    }

    pub fn is_satisfied(&self) -> bool {
        matches!(self, StepsizeVerdict::Satisfied { .. })
    }
}

/// `√(10(V1 + V_Υ/ρ) + 4L²(γ1² + γ2²))`, the inertia-and-variance term of the
/// step-size condition.
pub fn variance_term(l: f64, gamma1: f64, gamma2: f64, vr: &VRConstants) -> Result<f64> {
    if !(vr.rho > 0.0 && vr.rho <= 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {}", vr.rho)));
    }
    Ok((10.0 * (vr.v1 + vr.v_upsilon / vr.rho) + 4.0 * l * l * (gamma1 * gamma1 + gamma2 * gamma2)).sqrt())
}

/// Right-hand side `R = L + 2α1 + 2α2 + 2Q + 6ε` of the kernel-scale condition.
pub fn stepsize_bound(
    l: f64,
    alpha1: f64,
    alpha2: f64,
    gamma1: f64,
    gamma2: f64,
    vr: &VRConstants,
    epsilon: f64,
) -> Result<f64> {
    let inputs = [l, alpha1, alpha2, gamma1, gamma2, vr.v1, vr.v2, vr.v_upsilon, epsilon];
    if inputs.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("step-size inputs must be finite and nonnegative".into()));
    }
    let q = variance_term(l, gamma1, gamma2, vr)?;
    Ok(l + 2.0 * alpha1 + 2.0 * alpha2 + 2.0 * q + 6.0 * epsilon)
}

/// Checks `min(θ1, θ2) > R` (strictly).
#[allow(clippy::too_many_arguments)]
pub fn validate_stepsize(
    theta1: f64,
    theta2: f64,
    l: f64,
    alpha1: f64,
    alpha2: f64,
    gamma1: f64,
    gamma2: f64,
    vr: &VRConstants,
    epsilon: f64,
) -> Result<StepsizeVerdict> {
    let r = stepsize_bound(l, alpha1, alpha2, gamma1, gamma2, vr, epsilon)?;
    let margin = theta1.min(theta2) - r;
    Ok(if margin > 0.0 { StepsizeVerdict::Satisfied { margin } } else { StepsizeVerdict::Violated { margin } })
}

/// The step-size condition evaluated for a configuration at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeCheck {
    /// Kernel moduli `θ1`, `θ2` the solver would use at the point.
    pub theta: (f64, f64),
    /// Lipschitz bound of `∇H`.
    pub l: f64,
    /// Per-component Lipschitz bound entering the estimator constants.
    pub n: f64,
    pub alphas: (f64, f64),
    pub gammas: (f64, f64),
    pub vr: VRConstants,
    pub bound: f64,
    pub verdict: StepsizeVerdict,
}

/// Evaluates the step-size condition for `config` at `point`, using the
/// inertia caps of the schedules. `lipschitz` overrides the bound of `∇H`
/// that would otherwise come from the problem's hint.
pub fn check_config(
    problem: &dyn Problem,
    config: &SolverConfig,
    point: &BlockPoint,
    lipschitz: Option<f64>,
) -> Result<StepsizeCheck> {
    let theta = if config.adaptive_theta {
        let tx = config.kernel_x.with_scale(config.safety_factor * problem.partial_lipschitz(Block::X, point)?)?;
        let ty = config.kernel_y.with_scale(config.safety_factor * problem.partial_lipschitz(Block::Y, point)?)?;
        (tx.strong_convexity(), ty.strong_convexity())
    } else {
        (config.kernel_x.strong_convexity(), config.kernel_y.strong_convexity())
    };
    let l = match lipschitz {
        Some(l) => l,
        None => problem.lipschitz_hint(point, false)?.n,
    };
    let est = &config.estimator;
    let n_comp = problem.n_components();
    let per_component = match est.kind {
        EstimatorKind::Full => 0.0,
        _ => problem.lipschitz_hint(point, true)?.n,
    };
    let gammas = config.schedules.gamma_caps();
    let (mut a1, mut a2) = config.schedules.alpha_caps();
    if config.scale_linear_terms {
        let s = theta.0.max(theta.1);
        a1 *= s;
        a2 *= s;
    }
    let p = if est.kind == EstimatorKind::Sarah { est.sarah_p() } else { 2.0 };
    let vr = vr_constants(est.kind, per_component, gammas.0, gammas.1, est.batch_size.clamp(1, n_comp), n_comp, p)?;
    let bound = stepsize_bound(l, a1, a2, gammas.0, gammas.1, &vr, config.epsilon)?;
    let verdict = validate_stepsize(theta.0, theta.1, l, a1, a2, gammas.0, gammas.1, &vr, config.epsilon)?;
    Ok(StepsizeCheck { theta, l, n: per_component, alphas: (a1, a2), gammas, vr, bound, verdict })
}
