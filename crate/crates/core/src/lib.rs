//! Low-rank spectral deferred correction with merge-BUG integrators for
//! linear matrix differential equations `dX/dt = Σ_j A_j X B_jᵀ + G(t)`.

pub mod dense;
pub mod error;
pub mod lowrank;
pub mod mbug;
pub mod operators;
pub mod problems;
pub mod reference;
pub mod scalar;
pub mod sdc;
pub mod sylvester;

pub use error::{Error, Result};
pub use lowrank::{rounded_sum, truncate, Factorization, TruncationMode};
pub use mbug::{mbug_step, MbugStepReport};
pub use operators::{CoefficientOperator, LinearMatrixOde};
pub use problems::{BenchmarkProblem, Problem, ProblemId};
pub use scalar::{Scalar, ScalarField};
pub use sdc::{integrate, lobatto_grid, sdc_dense_step, sdc_mbug_step, IntegrateOptions, ToleranceSchedule};
