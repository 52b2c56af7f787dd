//! Projection-guided sampling-based trajectory optimization.
//!
//! A Gaussian over polynomial trajectory coefficients is sampled, each sample
//! is pushed toward the feasible set by a batch projection solver (augmented
//! Lagrangian with closed-form alternating minimization over polar auxiliary
//! variables), and the distribution is refit to the lowest-cost projected
//! samples.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub(crate) mod clock;
pub mod costs;
pub mod error;
pub mod linalg;
pub mod polar;
pub mod projection;
pub mod sampler;
pub mod sim;

#[cfg(feature = "cli")]
pub mod cli;

pub use basis::{BasisKind, BasisSet, BoundaryConstraints, Kinematics, StartState, Trajectory};
pub use costs::CostWeights;
pub use error::{Error, Result};
pub use polar::{Limits, Obstacle, PolarConstraintSystem, PolarVariables};
pub use projection::{ProjectionConfig, ProjectionWorkspace};
pub use sampler::{OptimizeResult, Problem, SamplerConfig, SamplerState};
