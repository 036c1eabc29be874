//! Invariant calculus of variations for curves under SE(2) and SE(3).
pub mod batch;
mod error;
pub mod expr;
pub mod geometry;
pub mod ode;
pub mod se2;
pub mod se3;
pub mod system;

pub use error::SolverError;
