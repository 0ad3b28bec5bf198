//! The mollified stochastic heat equation and the checks built on it.

pub mod checks;
pub mod coefficient;
pub mod solver;

pub use checks::*;
pub use coefficient::*;
pub use solver::*;
