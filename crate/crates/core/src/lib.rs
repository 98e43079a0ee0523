//! One-dimensional Poisson–Nernst–Planck (PNP) solver.
//!
//! Ion concentrations drift and diffuse on `[-1, 1]` under a potential that
//! solves a Poisson equation with Robin boundary conditions; the ions obey
//! no-flux conditions. Time stepping is TR-BDF2 with a fixed number of
//! concentration/potential alternations per stage in place of a Newton
//! solve. Two boundary discretizations are provided: a standard
//! forward-difference closure and a conservative one whose rows make the
//! trapezoid-rule total of every species an algebraic invariant of the
//! discrete update.
//!
//! Module map:
//!
//! - [`params`]: physical constants, nondimensionalization, coefficient profiles
//! - [`grid`]: uniform mesh, field storage, trapezoid quadrature
//! - [`banded`]: tridiagonal matrices with corner extras and their solver
//! - [`spatial`]: stencils, ghost-point Robin closure, implicit system assembly
//! - [`stepper`]: Poisson solve, TR and BDF2 stages, time marching
//! - [`diagnostics`]: totals, energy, dissipation, chemical potential
//! - [`harness`]: convergence studies, Poisson–Boltzmann oracle, sweeps
//! - [`io`]: flat key-value configuration and CSV/JSON outputs

pub mod banded;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod params;
pub mod spatial;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{FieldState, Grid};
pub use params::{DimensionlessParameters, PhysicalParameters, Profile, SpeciesParameters};
pub use spatial::{BoundaryScheme, Discretization};
pub use stepper::StepperConfig;

/// Version string embedded in every output file header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
