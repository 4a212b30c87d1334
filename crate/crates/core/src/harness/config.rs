//! JSON experiment configuration.
//!
//! Relative paths inside a config file are resolved against the directory
//! holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind, SagaMode};
use crate::harness::io::{load_matrix, load_pgm, MatrixFormat};
use crate::harness::synthetic::{blur, motion_kernel, planted_snmf, test_image};
use crate::problems::{Bid, BidConfig, Problem, Snmf, SnmfConfig};
use crate::solvers::{preset, Preset, Schedules, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Sparse NMF of a matrix read from disk.
    Snmf {
        path: PathBuf,
        #[serde(default)]
        format: Option<MatrixFormat>,
        rank: usize,
        #[serde(default = "default_nonzero")]
        nonzero_fraction: f64,
        #[serde(default = "default_eta")]
        eta: f64,
    },
    /// Sparse NMF of a planted factorization.
    Synthetic {
        rows: usize,
        cols: usize,
        rank: usize,
        #[serde(default = "default_nonzero")]
        nonzero_fraction: f64,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_eta")]
        eta: f64,
    },
    /// Blind deconvolution of an image from disk, or of the built-in test
    /// image blurred by a motion kernel when `path` is absent.
    Bid {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default = "default_image_size")]
        size: [usize; 2],
        #[serde(default = "default_kernel_size")]
        kernel_size: usize,
        #[serde(default)]
        blur_angle: f64,
        #[serde(default = "default_blur_noise")]
        noise: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_bid_eta")]
        eta: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        strips: Option<usize>,
    },
}

fn default_nonzero() -> f64 {
    0.25
}
fn default_eta() -> f64 {
    3.0
}
fn default_noise() -> f64 {
    0.01
}
fn default_image_size() -> [usize; 2] {
    [64, 64]
}
fn default_kernel_size() -> usize {
    9
}
fn default_blur_noise() -> f64 {
    0.005
}
fn default_bid_eta() -> f64 {
    5e-5
}
fn default_sigma() -> f64 {
    1e3
}

/// One algorithm of an experiment: a preset plus optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub preset: Preset,
    /// Estimator of a stochastic preset; SARAH when absent.
    #[serde(default)]
    pub estimator: Option<EstimatorKind>,
    #[serde(default)]
    pub saga_mode: Option<SagaMode>,
    #[serde(default)]
    pub refresh_prob: Option<f64>,
    #[serde(default)]
    pub batch_fraction: Option<f64>,
    #[serde(default)]
    pub safety_factor: Option<f64>,
    #[serde(default)]
    pub schedules: Option<Schedules>,
    #[serde(default)]
    pub scale_linear_terms: Option<bool>,
    /// Fixed kernel scales `[θ1, θ2]`; disables the adaptive rule.
    #[serde(default)]
    pub theta: Option<[f64; 2]>,
    /// Lipschitz bound used by the step-size check instead of the
    /// problem's own estimate.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub label: Option<String>,
}

impl AlgorithmSpec {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            estimator: None,
            saga_mode: None,
            refresh_prob: None,
            batch_fraction: None,
            safety_factor: None,
            schedules: None,
            scale_linear_terms: None,
            theta: None,
            lipschitz: None,
            label: None,
        }
    }

    pub fn with_estimator(mut self, kind: EstimatorKind) -> Self {
        self.estimator = Some(kind);
        self
    }

    fn estimator_kind(&self) -> EstimatorKind {
        if self.preset.is_stochastic() {
            self.estimator.unwrap_or(EstimatorKind::Sarah)
        } else {
            EstimatorKind::Full
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.preset.label(self.estimator_kind()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_batch_fraction")]
    pub batch_fraction: f64,
    #[serde(default = "default_refresh")]
    pub refresh_prob: f64,
    pub epochs: f64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub diagnostics: bool,
    /// Diagnostics are recorded every this many iterations.
    #[serde(default = "default_every")]
    pub diagnostics_every: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Reject unknown keys and refuse to run configurations that violate
    /// the step-size condition.
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_log_y")]
    pub log_y: bool,
}

fn default_batch_fraction() -> f64 {
    0.05
}
fn default_refresh() -> f64 {
    0.05
}
fn default_every() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_safety() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_log_y() -> bool {
    true
}

/// `floor(fraction · n)`, at least one.
pub fn batch_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).floor() as usize).clamp(1, n.max(1))
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, algorithms: Vec<AlgorithmSpec>, epochs: f64, seeds: Vec<u64>) -> Self {
        Self {
            problem,
            algorithms,
            batch_fraction: default_batch_fraction(),
            refresh_prob: default_refresh(),
            epochs,
            seeds,
            diagnostics: false,
            diagnostics_every: 1,
            output_dir: default_output(),
            safety_factor: 1.0,
            epsilon: default_epsilon(),
            strict: false,
            log_y: true,
        }
    }

    /// Parses JSON, returning the config and the paths of ignored keys.
    /// Unknown keys are an error when `strict` is set here or in the file.
    pub fn from_json(text: &str, strict: bool) -> Result<(Self, Vec<String>)> {
        let mut unknown = Vec::new();
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| Error::Config(e.to_string()))?;
        if (strict || cfg.strict) && !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        cfg.validate()?;
        Ok((cfg, unknown))
    }

    /// Reads a config file; warnings about ignored keys go to the log.
    pub fn load(path: &Path, strict: bool) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (mut cfg, unknown) =
            Self::from_json(&text, strict).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for key in unknown {
            log::warn!("{}: ignoring unknown key `{key}`", path.display());
        }
        cfg.strict |= strict;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem {
            ProblemSpec::Snmf { path, .. } => fix(path),
            ProblemSpec::Bid { path: Some(path), .. } => fix(path),
            _ => {}
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.batch_fraction) {
            return Err(Error::Config(format!("batch_fraction {} outside (0, 1]", self.batch_fraction)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if !(self.epochs >= 1.0) {
            return Err(Error::Config(format!("epochs must be at least 1, got {}", self.epochs)));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms must not be empty".into()));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::Config("diagnostics_every must be positive".into()));
        }
        for a in &self.algorithms {
            if let Some(f) = a.batch_fraction.filter(|f| !frac_ok(*f)) {
                return Err(Error::Config(format!("{}: batch_fraction {f} outside (0, 1]", a.label())));
            }
            if let Some(t) = a.theta.filter(|t| !(t[0] > 0.0 && t[1] > 0.0)) {
                return Err(Error::Config(format!("{}: theta {t:?} must be positive", a.label())));
            }
        }
        Ok(())
    }

    /// Builds the problem instance.
    pub fn build_problem(&self) -> Result<Box<dyn Problem>> {
        Ok(match &self.problem {
            ProblemSpec::Snmf { path, format, rank, nonzero_fraction, eta } => {
                let fmt = match format {
                    Some(f) => *f,
                    None => MatrixFormat::from_path(path)
                        .ok_or_else(|| Error::Config(format!("{}: cannot infer the matrix format", path.display())))?,
                };
                let a = load_matrix(path, fmt)?;
                let sparsity = SnmfConfig::sparsity_from_fraction(a.nrows(), *nonzero_fraction);
                Box::new(Snmf::new(SnmfConfig { a, rank: *rank, sparsity, eta_fit: *eta })?)
            }
            ProblemSpec::Synthetic { rows, cols, rank, nonzero_fraction, noise, seed, eta } => {
                let planted = planted_snmf(*rows, *cols, *rank, *nonzero_fraction, *noise, *seed)?;
                Box::new(Snmf::new(planted.snmf_config(*eta))?)
            }
            ProblemSpec::Bid { path, size, kernel_size, blur_angle, noise, seed, eta, sigma, strips } => {
                let a = match path {
                    Some(p) => match MatrixFormat::from_path(p) {
                        Some(fmt) => load_matrix(p, fmt)?,
                        None => load_pgm(p)?,
                    },
                    None => {
                        let k = motion_kernel(*kernel_size, *blur_angle)?;
                        blur(&test_image(size[0], size[1]), &k, *noise, *seed)?
                    }
                };
                let mut cfg = BidConfig::new(a, *kernel_size);
                cfg.eta_reg = *eta;
                cfg.sigma = *sigma;
                if let Some(s) = strips {
                    cfg.n_strips = *s;
                }
                Box::new(Bid::new(cfg)?)
            }
        })
    }

    /// Solver configuration of one algorithm for one seed.
    pub fn solver_config(&self, alg: &AlgorithmSpec, n_components: usize, seed: u64) -> Result<SolverConfig> {
        let b = batch_size(alg.batch_fraction.unwrap_or(self.batch_fraction), n_components);
        let q = alg.refresh_prob.unwrap_or(self.refresh_prob);
        let estimator = match alg.estimator_kind() {
            EstimatorKind::Full => EstimatorConfig::full(),
            EstimatorKind::Sgd => EstimatorConfig::sgd(b),
            EstimatorKind::Saga => EstimatorConfig::saga(b, alg.saga_mode.unwrap_or_default()),
            EstimatorKind::Sarah => EstimatorConfig::sarah(b, q),
        };
        estimator.validate(n_components)?;
        let base = SolverConfig {
            estimator,
            max_epochs: self.epochs,
            seed,
            safety_factor: alg.safety_factor.unwrap_or(self.safety_factor),
            epsilon: self.epsilon,
            diagnostics: self.diagnostics,
            ..SolverConfig::default()
        };
        let mut cfg = preset(alg.preset, &base);
        if let Some(s) = alg.schedules {
            cfg.schedules = s;
        }
        if let Some(s) = alg.scale_linear_terms {
            cfg.scale_linear_terms = s;
        }
        if let Some([t1, t2]) = alg.theta {
            cfg.adaptive_theta = false;
            cfg.kernel_x = cfg.kernel_x.with_scale(t1)?;
            cfg.kernel_y = cfg.kernel_y.with_scale(t2)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
