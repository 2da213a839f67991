//! Kernel ridge regression and its randomized-sketch approximations.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`] evaluates the built-in kernels and builds the empirical
//!   kernel matrix `K_ij = k(x_i, x_j) / n` together with its cached
//!   spectrum.
//! * [`complexity`] computes the kernel complexity function, the critical
//!   radius and the statistical dimension of a spectrum.
//! * [`sketch`] draws Gaussian, randomized orthogonal system (ROS) and
//!   sub-sampling sketches and applies them quickly.
//! * [`solver`] solves exact, sketched, zero-noise and dual/Nystrom
//!   formulations of the regression program.
//! * [`satisfiability`] certifies the two operator-norm conditions that a
//!   sketch must meet to keep the minimax rate.
//! * [`bench`] generates data, runs Monte Carlo sweeps and persists results
//!   as CSV.

pub mod bench;
pub mod complexity;
pub mod error;
pub mod kernel;
pub mod satisfiability;
pub mod sketch;
pub mod solver;

pub use complexity::{
    critical_radius, kernel_complexity, population_eigenvalues, rate_exponent_check,
    statistical_dimension, ComplexityProfile, PopulationSpectrum,
};
pub use error::{Error, Result};
pub use kernel::{build_kernel_matrix, kernel_eval, DesignPoints, KernelMatrix, KernelSpec};
pub use satisfiability::{check_k_satisfiable, recommended_sketch_dim, SatisfiabilityReport};
pub use sketch::{draw_sketch, fwht, SketchKind, SketchOperator};
pub use solver::{
    empirical_error, error_decomposition, predict, solve_dual_krr, solve_krr,
    solve_nystrom_dual, solve_sketched_krr, solve_zero_noise, ErrorDecomposition, FitResult,
    FitVariant, RegressionSample,
};
