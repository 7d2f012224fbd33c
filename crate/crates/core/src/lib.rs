//! Discrete-time Nash equilibria of the n-trader Obizhaeva-Wang execution
//! game with quadratic instantaneous costs, their closed forms, costs, and
//! high-frequency limits.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod asymptotics;
pub mod closed_form;
pub mod continuous;
pub mod cost;
pub mod equilibrium;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod verification;

pub use equilibrium::{solve_equilibrium, SolveMethod};
pub use error::{Error, Result};
pub use kernel::HalfGridMode;
pub use scalar::Scalar;

pub type ModelParams = model::ModelParams<f64>;
pub type GridSpec = model::GridSpec<f64>;
pub type EquilibriumVectors = equilibrium::EquilibriumVectors<f64>;
pub type Equilibrium = equilibrium::Equilibrium<f64>;
pub type StrategyProfile = equilibrium::StrategyProfile<f64>;
pub type KernelMatrices = kernel::KernelMatrices<f64>;
pub type ExpKernelOperator = kernel::ExpKernelOperator<f64>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type CostBreakdown = cost::CostBreakdown<f64>;
pub type ContinuousLimit = continuous::ContinuousLimit<f64>;
pub type ContinuousCost = continuous::ContinuousCost<f64>;
pub type ClusterPointSet = asymptotics::ClusterPointSet<f64>;
pub type RateDiagnostic = asymptotics::RateDiagnostic<f64>;
pub type AuditReport = verification::AuditReport<f64>;
