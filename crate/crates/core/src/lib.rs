//! p-adic stationary phase for complete exponential sums modulo prime powers,
//! the trace-function sums `K_χ` built from Dirichlet characters mod `p^n`,
//! and numerical moments and large-value counts of `L(1/2, χ)`.

pub mod error;
pub mod characters;
pub mod padic;
pub mod lvalues;
pub mod phase;
pub mod roots;
pub mod tracefn;

pub use error::{Error, Result};
