//! Convex optimization machinery shared by the planners.

mod dinkelbach;
mod program;
mod sca;
mod solve;

pub use dinkelbach::{dinkelbach, DinkelbachOptions, DinkelbachResult, DinkelbachStep, Fractional};
pub use program::{Affine, Constraint, ConvexProgram, Sense, Var};
pub use sca::{sca_drive, ScaOptions, ScaTrace};
pub use solve::{solve, Solution, SolveStatus, SolverSettings};
