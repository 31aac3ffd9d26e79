//! Moving-domain simulator for a compressible barotropic fluid coupled to a
//! viscoelastic plate across a periodic slab, with Navier-slip walls.
//!
//! The crate provides the spatial discretization (ALE form on the fixed
//! reference slab), an operator-splitting time integrator with strong,
//! penalized or subiterated kinematic coupling, the energy and relative
//! energy diagnostics used to monitor runs, and a sweep harness that
//! measures convergence rates in the low-Mach / high-Reynolds regime.

pub mod checks;
pub mod diagnostics;
pub mod io;
pub mod error;
pub mod fluid;
pub mod geometry;
pub mod grid;
pub mod la;
pub mod limits;
pub mod params;
pub mod plate;
pub mod profiles;
pub mod scheme;
pub mod spectral;
pub mod state;
pub mod stencil;

pub use error::{Result, SimError};
pub use grid::{integrate_plate, integrate_reference, Grid, ScalarField, TensorField, VectorField};
pub use params::{Coupling, Params};
pub use state::State;
