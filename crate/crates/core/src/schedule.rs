use serde::{Deserialize, Serialize};

/// Inertial parameter sequence indexed by the iteration counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InertialSchedule {
    Constant(f64),
    /// `max(0, (k − 1)/(k + 2))`.
    Accelerated,
}

impl Default for InertialSchedule {
    fn default() -> Self {
        InertialSchedule::Constant(0.0)
    }
}

impl InertialSchedule {
    pub const ZERO: InertialSchedule = InertialSchedule::Constant(0.0);

    pub fn value(&self, k: usize) -> f64 {
        match *self {
            InertialSchedule::Constant(c) => c,
            InertialSchedule::Accelerated => {
                let k = k as f64;
                ((k - 1.0) / (k + 2.0)).max(0.0)
            }
        }
    }

    /// Upper bound of the sequence over all `k`.
    pub fn cap(&self) -> f64 {
        match *self {
            InertialSchedule::Constant(c) => c,
            InertialSchedule::Accelerated => 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, InertialSchedule::Constant(c) if c == 0.0)
    }
}

pub fn inertial_schedule(kind: InertialSchedule, k: usize) -> f64 {
    kind.value(k)
}
