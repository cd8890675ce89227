//! Numerical laboratory for the one-dimensional nonlocal transport equations
//! arising from infinite-energy porous-medium flow and its change of
//! variables to the Proudman-Johnson equation: nonlinear solvers, blow-up
//! detection and rate fitting, self-similar/modulation diagnostics, weighted
//! damping measurements, steady-state classification and characteristics.

pub mod acceptance;
pub mod characteristics;
pub mod error;
pub mod grid;
pub mod io;
pub mod ipm;
pub mod steady;
pub mod linear;
pub mod modulation;
pub mod pj;
pub mod trajectory;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{AccuracyPolicy, Grid, GridFunction, IntegralBase};
pub use trajectory::{FieldTrajectory, RunStatus, StepPolicy};
