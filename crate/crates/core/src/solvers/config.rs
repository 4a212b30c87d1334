use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::kernel::{BregmanKernel, KernelKind};
use crate::schedule::InertialSchedule;

/// The eight inertial sequences of the iteration.
///
/// `gamma*`/`mu*` extrapolate the gradient evaluation points of the x and y
/// blocks, `alpha*`/`beta*` weight the linear correction terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedules {
    pub gamma1: InertialSchedule,
    pub gamma2: InertialSchedule,
    pub mu1: InertialSchedule,
    pub mu2: InertialSchedule,
    pub alpha1: InertialSchedule,
    pub alpha2: InertialSchedule,
    pub beta1: InertialSchedule,
    pub beta2: InertialSchedule,
}

impl Schedules {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn all(s: InertialSchedule) -> Self {
        Self { gamma1: s, gamma2: s, mu1: s, mu2: s, alpha1: s, alpha2: s, beta1: s, beta2: s }
    }

    pub fn one_step(s: InertialSchedule) -> Self {
        Self { gamma1: s, mu1: s, alpha1: s, beta1: s, ..Self::zero() }
    }

    fn each(&self) -> [InertialSchedule; 8] {
        [self.gamma1, self.gamma2, self.mu1, self.mu2, self.alpha1, self.alpha2, self.beta1, self.beta2]
    }

    pub fn coefficients(&self, k: usize) -> Coefficients {
        Coefficients {
            gamma1: self.gamma1.value(k),
            gamma2: self.gamma2.value(k),
            mu1: self.mu1.value(k),
            mu2: self.mu2.value(k),
            alpha1: self.alpha1.value(k),
            alpha2: self.alpha2.value(k),
            beta1: self.beta1.value(k),
            beta2: self.beta2.value(k),
        }
    }

    /// `(γ1, γ2)` caps, taken over both the x and y extrapolations.
    pub fn gamma_caps(&self) -> (f64, f64) {
        (self.gamma1.cap().max(self.mu1.cap()), self.gamma2.cap().max(self.mu2.cap()))
    }

    /// `(α1, α2)` caps, taken over both linear-term families.
    pub fn alpha_caps(&self) -> (f64, f64) {
        (self.alpha1.cap().max(self.beta1.cap()), self.alpha2.cap().max(self.beta2.cap()))
    }
}

/// Schedule values at one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub gamma1: f64,
    pub gamma2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub schedules: Schedules,
    pub kernel_x: BregmanKernel,
    pub kernel_y: BregmanKernel,
    /// Reset the kernel scales every iteration to `safety_factor` times the
    /// current partial Lipschitz constants.
    pub adaptive_theta: bool,
    pub safety_factor: f64,
    /// Multiply the linear-term coefficients by the current kernel scale, the
    /// form taken by a prox-centre shift `‖x − (x_k + α(x_k − x_{k−1}))‖²`.
    pub scale_linear_terms: bool,
    pub estimator: EstimatorConfig,
    pub max_epochs: f64,
    pub seed: u64,
    pub epsilon: f64,
    /// Compute exact gradients alongside the estimates to record errors.
    pub diagnostics: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            schedules: Schedules::zero(),
            kernel_x: BregmanKernel::quadratic(1.0).expect("positive scale"),
            kernel_y: BregmanKernel::quadratic(1.0).expect("positive scale"),
            adaptive_theta: true,
            safety_factor: 1.0,
            scale_linear_terms: false,
            estimator: EstimatorConfig::full(),
            max_epochs: 10.0,
            seed: 0,
            epsilon: 1e-3,
            diagnostics: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for s in self.schedules.each() {
            let bad = match s {
                InertialSchedule::Constant(c) => !(c.is_finite() && c >= 0.0),
                InertialSchedule::Accelerated => false,
            };
            if bad {
                return Err(Error::InvalidParameter(format!("inertial schedule {s:?} must be finite and nonnegative")));
            }
        }
        if !(self.safety_factor > 0.0 && self.safety_factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("safety factor must be positive, got {}", self.safety_factor)));
        }
        if !(self.max_epochs > 0.0) {
            return Err(Error::InvalidParameter(format!("max_epochs must be positive, got {}", self.max_epochs)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "PALM")]
    Palm,
    #[serde(rename = "iPALM")]
    IPalm,
    #[serde(rename = "TiPALM")]
    TiPalm,
    #[serde(rename = "BTiPALM")]
    BTiPalm,
    #[serde(rename = "SPRING")]
    Spring,
    #[serde(rename = "SiPALM")]
    SiPalm,
    #[serde(rename = "STiBPALM")]
    StiBPalm,
    #[serde(rename = "BSTiPALM")]
    BsTiPalm,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Palm,
        Preset::IPalm,
        Preset::TiPalm,
        Preset::BTiPalm,
        Preset::Spring,
        Preset::SiPalm,
        Preset::StiBPalm,
        Preset::BsTiPalm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Palm => "PALM",
            Preset::IPalm => "iPALM",
            Preset::TiPalm => "TiPALM",
            Preset::BTiPalm => "BTiPALM",
            Preset::Spring => "SPRING",
            Preset::SiPalm => "SiPALM",
            Preset::StiBPalm => "STiBPALM",
            Preset::BsTiPalm => "BSTiPALM",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Preset::Spring | Preset::SiPalm | Preset::StiBPalm | Preset::BsTiPalm)
    }

    /// Label used in reports, e.g. `STiBPALM-SARAH`.
    pub fn label(&self, estimator: EstimatorKind) -> String {
        if self.is_stochastic() {
            format!("{}-{}", self.name(), estimator.name().to_ascii_uppercase())
        } else {
            self.name().to_string()
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// `base` with the estimator, inertia and kernel pattern of `preset`.
///
/// Deterministic presets switch to the full gradient. Stochastic presets keep
/// a stochastic base estimator and otherwise fall back to SARAH with the
/// base batch size.
pub fn preset(preset: Preset, base: &SolverConfig) -> SolverConfig {
    let ratio = InertialSchedule::Accelerated;
    let mut cfg = base.clone();
    cfg.scale_linear_terms = false;
    cfg.kernel_x = BregmanKernel::new(KernelKind::Quadratic, base.kernel_x.scale()).expect("positive scale");
    cfg.kernel_y = BregmanKernel::new(KernelKind::Quadratic, base.kernel_y.scale()).expect("positive scale");
    if preset.is_stochastic() {
        if !base.estimator.kind.is_stochastic() {
            cfg.estimator = EstimatorConfig { kind: EstimatorKind::Sarah, ..base.estimator };
        }
    } else {
        cfg.estimator = EstimatorConfig { kind: EstimatorKind::Full, ..base.estimator };
    }
    cfg.schedules = match preset {
        Preset::Palm | Preset::Spring => Schedules::zero(),
        Preset::IPalm | Preset::SiPalm => {
            cfg.scale_linear_terms = true;
            Schedules::one_step(ratio)
        }
        Preset::TiPalm | Preset::BTiPalm => {
            Schedules { alpha1: ratio, alpha2: ratio, beta1: ratio, beta2: ratio, ..Schedules::zero() }
        }
        Preset::StiBPalm | Preset::BsTiPalm => Schedules::all(ratio),
    };
    if matches!(preset, Preset::BTiPalm | Preset::BsTiPalm) {
        cfg.kernel_x = BregmanKernel::new(KernelKind::Quartic, base.kernel_x.scale()).expect("positive scale");
    }
    cfg
}
