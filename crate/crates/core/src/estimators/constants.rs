use serde::{Deserialize, Serialize};

use super::EstimatorKind;
use crate::error::{Error, Result};

/// Parameters `(V1, V2, V_Υ, ρ)` of a variance-reduced estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VRConstants {
    pub v1: f64,
    pub v2: f64,
    pub v_upsilon: f64,
    pub rho: f64,
}

impl VRConstants {
    /// The exact-gradient estimator: no error terms and `ρ = 1`.
    pub const EXACT: VRConstants = VRConstants { v1: 0.0, v2: 0.0, v_upsilon: 0.0, rho: 1.0 };
}

/// Variance-reduction constants for SAGA and SARAH.
///
/// `lip` is the gradient Lipschitz bound (`N` for SAGA, `M` for SARAH) and
/// `p > 1` the inverse SARAH refresh probability; it is ignored for SAGA.
pub fn vr_constants(
    kind: EstimatorKind,
    lip: f64,
    gamma1: f64,
    gamma2: f64,
    b: usize,
    n: usize,
    p: f64,
) -> Result<VRConstants> {
    if b == 0 || n == 0 || b > n {
        return Err(Error::InvalidParameter(format!("need 1 <= b <= n, got b={b}, n={n}")));
    }
    if [lip, gamma1, gamma2].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("Lipschitz bound and inertia must be finite and nonnegative".into()));
    }
    let inertia = 1.0 + 2.0 * gamma1 * gamma1 + gamma2 * gamma2;
    match kind {
        EstimatorKind::Full => Ok(VRConstants::EXACT),
        EstimatorKind::Sgd => Err(Error::NotVarianceReduced("SGD")),
        EstimatorKind::Saga => {
            let (bf, nf) = (b as f64, n as f64);
            let g = gamma1.max(gamma2);
            Ok(VRConstants {
                v1: 16.0 * lip * lip * g * g / bf,
                v2: 4.0 * lip * g / bf.sqrt(),
                v_upsilon: 408.0 * nf * lip * lip * inertia / (bf * bf),
                rho: bf / (2.0 * nf),
            })
        }
        EstimatorKind::Sarah => {
            if !(p > 1.0) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!("SARAH needs p > 1, got {p}")));
            }
            let c = 6.0 * (1.0 - 1.0 / p) * inertia;
            Ok(VRConstants { v1: c * lip * lip, v2: lip * c.sqrt(), v_upsilon: c * lip * lip, rho: 1.0 / p })
        }
    }
}
