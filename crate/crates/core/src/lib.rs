//! Homogeneous PID control.
//!
//! Dilation algebra and homogeneous norms, linear and homogeneous PID
//! laws, the extended closed-loop plant, Lyapunov certificates over the
//! homogeneity degree, a fixed-step simulator and performance indices.

// `!(a <= b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod control;
pub mod error;
pub mod homogeneity;
pub mod linalg;
pub mod metrics;
pub mod plant;
pub mod sim;
pub mod stability;

pub use control::{hpid_step, pid_step, GainSet, HpidState};
pub use error::{Error, Result};
pub use homogeneity::{Canonical, Dilation, Experimental, HomNormSpec, HomogeneousNorm, WeightedSum};
pub use metrics::MetricsReport;
pub use plant::{closed_loop_field, ClosedLoop, ExtendedState, JointPlantConfig, NormChoice};
pub use sim::{simulate, Scenario, Trajectory};
pub use stability::{certify, lyapunov_decrease_check, StabilityCertificate};
