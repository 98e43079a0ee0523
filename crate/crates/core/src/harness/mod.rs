//! Studies built on the solver: convergence orders, the steady-state
//! Poisson–Boltzmann oracle, boundary-scheme comparisons and parameter
//! sweeps.

mod order;
mod pb;
mod studies;

pub use order::richardson_order;
pub use pb::{pb_steady_state, PbOptions, PbSolution};
pub use studies::*;
