//! Spectral deferred correction: subnode grids, the tolerance schedule, the
//! dense oracle and the low-rank SDC-mBUG driver.

pub mod dense;
pub mod driver;
pub mod grid;
pub mod schedule;

pub use dense::{implicit_euler_dense, sdc_dense_step};
pub use driver::{
    integrate, sdc_mbug_step, sweeps_for_order, IntegrateOptions, LevelDiagnostics, SdcDiagnostics,
    Trajectory,
};
pub use grid::{gauss_legendre, lobatto_grid, SdcGrid};
pub use schedule::{grid_constant, ToleranceSchedule};
