//! A small mixed-integer linear programming layer.
//!
//! Models are built from bounded continuous/integer/binary variables, sparse
//! linear constraints and a linear objective. Solving runs a dense
//! bounded-variable two-phase simplex for the LP relaxation and a best-first
//! branch-and-bound on fractional integer variables. Models can be exported
//! in the LP text interchange format for external solvers.
//!
//! The solver is generic over the scalar type (any [`Scalar`], e.g. `f32` or
//! `f64`); the concrete `f64` aliases at the crate root are what most callers
//! want.

mod export;
mod model;
mod simplex;
mod solve;

pub use export::write_lp;
pub use model::{ConstraintRef, LinearModel, Relation, Sense, VarKind, VarRef};
pub use solve::{solve, Solution, SolveLimits, SolveStatus};

use num_traits::Float;
use std::fmt::{Debug, Display, LowerExp};

/// Scalar type the solver can run on.
pub trait Scalar: Float + Debug + Display + LowerExp + Default + Send + Sync + 'static {
    /// Absolute feasibility / integrality tolerance.
    fn feas_tol() -> Self;
    /// Threshold below which a pivot element is considered numerically zero.
    fn pivot_tol() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn feas_tol() -> Self {
        1e-6
    }
    fn pivot_tol() -> Self {
        1e-9
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn feas_tol() -> Self {
        1e-4
    }
    fn pivot_tol() -> Self {
        1e-6
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

/// Default model over `f64`.
pub type Model = LinearModel<f64>;
/// Default solution over `f64`.
pub type ModelSolution = Solution<f64>;
