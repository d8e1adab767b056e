//! Reference elements, quadrature, and reference-to-physical maps.

pub mod basis;
pub mod mapping;
pub mod quadrature;

pub use basis::{eval_basis, BasisKind, BasisTables};
pub use mapping::{map_to_physical, PhysicalTables, TetGeometry};
pub use quadrature::{quad_rule, QuadratureRule};
