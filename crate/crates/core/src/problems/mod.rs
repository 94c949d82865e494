//! Fourier collocation discretizations of the benchmark problems.

pub mod examples;
pub mod fourier;

pub use examples::{
    example1_manufactured, example2_schrodinger, example3_anisotropic, example4_rotation, rotation_profile,
    BenchmarkProblem, ExactFn, Problem, ProblemId,
};
pub use fourier::{fourier_diff_matrices, PeriodicGrid, PERIOD};
