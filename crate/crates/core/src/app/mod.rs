//! Problem catalog, configuration, experiment drivers and field export.

pub mod config;
pub mod experiments;
pub mod export;
pub mod problems;

pub use config::RunConfig;
pub use experiments::{
    coupling_pivot, mesh_size, observed_order, run_cavity, run_convergence, run_coupling_study, solve_single,
    write_coupling_tables, CavityRow, ConvergenceRow, CouplingRow, ExperimentReport,
};
pub use export::{export_vtk, point_fields, PointFields};
pub use problems::ProblemKind;
