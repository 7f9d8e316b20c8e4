//! Solver for one-dimensional stochastic control problems whose control
//! enters through the volatility, `dX = f(X) dt + sqrt(u) sigma(X) dW`.
//!
//! The value function is computed by passing to `y = -phi_xx`, which solves
//! a nonlinear Fokker-Planck equation in `L^1`, stepping that equation with
//! implicit Euler (one resolvent solve per step), and integrating `y` back.
//! Feedback controls follow from `u* = (H*)'(sigma^2 y / 2)`.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod banded;
pub mod conjugation;
pub mod degenerate;
pub mod error;
pub mod expr;
pub mod grid;
pub mod hjb;
pub mod mc;
pub mod nd;
pub mod operator_b;
pub mod problem;
pub mod resolvent;
pub mod stepper;

pub use conjugation::{ConjugateHamiltonian, ConjugateTable, RunningCost};
pub use error::{Error, Result};
pub use expr::Expr;
pub use grid::{Field, Grid1D};
pub use operator_b::{apply_B, DriftData};
pub use problem::{Coefficient, ProblemSpec};
pub use resolvent::{apply_A, solve_resolvent, EllipticOperands, ResolventConfig, ResolventSolution};
pub use stepper::{energy_report, mild_solve, refine_until, step, MildSolution, StepperConfig, TransformedProblem};
pub use hjb::{interpolate_policy, reconstruct_value, synthesize_feedback, FeedbackPolicy, ValueFunction};
pub use degenerate::{check_linf_bound, solve_degenerate, DegenerateSweep};
pub use mc::{compare_policies, simulate_cost, ConstantControl, ControlLaw, McReport, SimConfig};
pub use nd::{apply_L, mild_solve_nd, Field2D, Grid2D, NdProblemSpec};
