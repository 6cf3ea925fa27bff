//! Testing shape restrictions on regression functions.
//!
//! The library discretizes a function space on a rectangular grid, projects
//! estimates onto convex cones of shape-restricted functions (monotone,
//! convex/concave, supermodular, nonnegative, Slutsky), and runs a bootstrap
//! test of whether the regression function satisfies the restriction. The
//! test statistic is the scaled L2 distance from an unconstrained B-spline
//! sieve estimate to the cone; critical values come from a score bootstrap
//! with a data-driven tuning parameter.

pub mod cones;
pub mod grid;
pub mod isotonic;
pub mod mc;
pub mod qp;
pub mod sieve;
pub mod testing;

pub use cones::{build_plan, diff_matrix, intersect, project, ConeError, ConeSpec, ProjectionPlan};
pub use grid::{FunctionGrid, Grid, GridError, ValueShape};
pub use isotonic::{pava, IsotonicError, IsotonicProblem};
pub use mc::{generate, run_study, BasisSpec, Design, StudyResult};
pub use qp::{QpProblem, QpSettings, QpSolution, QpStatus};
pub use sieve::{
    bootstrap_draw, eval_fit, fit, knots_from_quantiles, BootstrapConfig, Dataset, SieveBasis,
    SieveError, SieveFit, WeightLaw,
};
pub use testing::{run_test, run_test_on_grids, TestConfig, TestError, TestReport};
