//! Unrolled (forward-mode) and implicit differentiation of proximal gradient
//! methods with time-varying step sizes and momentum.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptor;
pub mod error;
pub mod experiment;
pub mod finite_diff;
pub mod generate;
pub mod implicit;
pub mod linalg;
pub mod problems;
pub mod recursion;
pub mod solver;
pub mod svg;
pub mod unroll;

pub use error::{Error, Result};
pub use implicit::{implicit_jvp_apg, implicit_jvp_pgd, ImplicitSolution};
pub use linalg::{spectral_radius, Matrix, Vector};
pub use problems::{ParamBundle, ParamDirection, Problem, ProblemKind, TangentMask};
pub use recursion::{estimate_rate, run_affine_limit, run_recursion, RateEstimate, RecursionSpec};
pub use solver::{reference_solve, run_epg, warm_start, Schedule, SolveTrace, StepRegime};
pub use unroll::{hypergradient, unroll_apg, unroll_from, unroll_pgd, JvpTrace};
