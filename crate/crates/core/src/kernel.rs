//! Bregman kernels `φ` and their distances.
//!
//! Two kernels are supported: the quadratic `φ(x) = (θ/2)‖x‖²` and the quartic
//! `φ(x) = (c²/4)‖x‖⁴`. The quadratic kernel is `θ`-strongly convex with a
//! `θ`-Lipschitz gradient. The quartic kernel is not strongly convex at the
//! origin, so its moduli are only reported for an annulus `r_min ≤ ‖x‖ ≤ r_max`
//! set with [`BregmanKernel::with_region`].

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_same_len, Error, Result};
use crate::point::{sq_dist, sq_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Quadratic,
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BregmanKernel {
    kind: KernelKind,
    scale: f64,
    region: Option<(f64, f64)>,
}

impl BregmanKernel {
    pub fn new(kind: KernelKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel scale must be positive, got {scale}")));
        }
        Ok(Self { kind, scale, region: None })
    }

    pub fn quadratic(theta: f64) -> Result<Self> {
        Self::new(KernelKind::Quadratic, theta)
    }

    pub fn quartic(c: f64) -> Result<Self> {
        Self::new(KernelKind::Quartic, c)
    }

    /// Declares the norm range of the iterates, used only to report the
    /// quartic kernel's local moduli.
    pub fn with_region(mut self, r_min: f64, r_max: f64) -> Self {
        self.region = Some((r_min.max(0.0), r_max.max(r_min.max(0.0))));
        self
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        let mut k = Self::new(self.kind, scale)?;
        k.region = self.region;
        Ok(k)
    }

    /// Strong-convexity modulus. For the quartic kernel this is `c² r_min²`
    /// on the declared region and `0` otherwise.
    pub fn strong_convexity(&self) -> f64 {
        match self.kind {
            KernelKind::Quadratic => self.scale,
            KernelKind::Quartic => match self.region {
                Some((r_min, _)) => self.scale * self.scale * r_min * r_min,
                None => 0.0,
            },
        }
    }

    /// Lipschitz modulus of `∇φ`. The quartic kernel uses `3 c² r_max²` and is
    /// unbounded without a declared region.
    pub fn grad_lipschitz(&self) -> f64 {
        match self.kind {
            KernelKind::Quadratic => self.scale,
            KernelKind::Quartic => match self.region {
                Some((_, r_max)) => 3.0 * self.scale * self.scale * r_max * r_max,
                None => f64::INFINITY,
            },
        }
    }

    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        let n2 = sq_norm(x);
        match self.kind {
            KernelKind::Quadratic => 0.5 * self.scale * n2,
            KernelKind::Quartic => 0.25 * self.scale * self.scale * n2 * n2,
        }
    }

    pub fn gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        ensure_finite(x.iter(), "kernel gradient input")?;
        Ok(match self.kind {
            KernelKind::Quadratic => x.mapv(|v| self.scale * v),
            KernelKind::Quartic => {
                let f = self.scale * self.scale * sq_norm(x);
                x.mapv(|v| f * v)
            }
        })
    }

    /// `D_φ(x, y) = φ(x) − φ(y) − ⟨∇φ(y), x − y⟩`.
    pub fn distance(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
        ensure_same_len(x.len(), y.len(), "bregman distance")?;
        ensure_finite(x.iter(), "bregman distance x")?;
        ensure_finite(y.iter(), "bregman distance y")?;
        match self.kind {
            KernelKind::Quadratic => Ok(0.5 * self.scale * sq_dist(x, y)),
            KernelKind::Quartic => {
                let g = self.gradient(y)?;
                let inner = Zip::from(&g).and(&x).and(&y).fold(0.0, |acc, &gi, &xi, &yi| acc + gi * (xi - yi));
                Ok((self.value(x) - self.value(y) - inner).max(0.0))
            }
        }
    }

    /// Solves `∇φ(x) = v` for `x`.
    pub fn inverse_gradient(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match self.kind {
            KernelKind::Quadratic => v.mapv(|t| t / self.scale),
            KernelKind::Quartic => {
                // c²‖x‖² x = v  ⇒  x ∥ v with ‖x‖ = (‖v‖/c²)^{1/3}
                let norm_v = sq_norm(v).sqrt();
                if norm_v == 0.0 {
                    return Array1::zeros(v.len());
                }
                let r = (norm_v / (self.scale * self.scale)).cbrt();
                v.mapv(|t| t * r / norm_v)
            }
        }
    }
}

pub fn bregman_distance(kernel: &BregmanKernel, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    kernel.distance(x, y)
}

pub fn kernel_gradient(kernel: &BregmanKernel, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    kernel.gradient(x)
}
