//! Conforming mixed finite elements for linear elasticity on rectangular
//! grids of any dimension.
//!
//! Stresses are symmetric tensors with `sigma_ii` quadratic in `x_i` and
//! `sigma_ij` bilinear in `(x_i, x_j)`; displacements have component `i`
//! linear in `x_i` on each element. The crate assembles the
//! Hellinger-Reissner saddle-point system, solves it, and measures errors and
//! superclose distances against manufactured solutions.

pub mod assembly;
pub mod element;
pub mod error;
pub mod grid;
pub mod interpolate;
pub mod manufactured;
pub mod material;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;
pub mod verify;

pub use assembly::{assemble, assemble_load, build_dof_map, DofMap, SaddleSystem};
pub use error::{Error, Result};
pub use grid::{ElementBox, Entity, TensorGrid};
pub use interpolate::{interp_stress, project_displacement, DisplacementField, StressField};
pub use manufactured::{polynomial_solution, sine_solution, ExactSolution, SolutionKind};
pub use material::LameParams;
pub use solver::{solve, SolveReport, SolverOptions, Strategy};
pub use study::{run_study, StudyConfig, StudyResult};
pub use verify::{error_norms, fit_rate, infsup_probe, kernel_ellipticity_probe, superclose_norms, ErrorRecord};
