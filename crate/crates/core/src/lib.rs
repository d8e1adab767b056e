//! Mixed finite element discretization of the stationary incompressible
//! MHD equations in augmented-Lagrangian form, with Picard linearization and
//! a block upper-triangular preconditioner for flexible GMRES.
//!
//! Velocity uses Taylor-Hood P2-P1 elements, the magnetic field uses
//! second-family Nedelec edge elements of order one, and the divergence
//! multiplier for the magnetic field uses P2 Lagrange elements.

pub mod app;
pub mod assembly;
pub mod element;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod precond;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod vtk;

pub use error::{MhdError, Result};

/// Wall clock used for phase timings; `std::time::Instant` panics on
/// `wasm32-unknown-unknown`.
#[cfg(not(target_arch = "wasm32"))]
pub(crate) use std::time::Instant;
#[cfg(target_arch = "wasm32")]
pub(crate) use web_time::Instant;
