pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod point;
pub mod problems;
pub mod schedule;
pub mod solvers;

pub use error::{Error, Result};
pub use kernel::{BregmanKernel, KernelKind};
pub use point::{extrapolate, BlockPoint, IterateWindow};
pub use problems::{Bid, BidConfig, Block, CoupledQuadratic, LipschitzEstimates, Objective, Problem, Snmf, SnmfConfig};
pub use schedule::InertialSchedule;
pub mod harness;
