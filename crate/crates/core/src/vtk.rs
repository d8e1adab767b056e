//! Legacy ASCII VTK output.

use std::io::Write;

use crate::error::Result;
use crate::mesh::TetMesh;

/// Write the header, points, and tetrahedral cells of an unstructured grid.
pub fn write_grid_header<W: Write>(out: &mut W, mesh: &TetMesh, title: &str) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for p in &mesh.vertices {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    writeln!(out, "CELLS {} {}", mesh.n_tets(), 5 * mesh.n_tets())?;
    for t in &mesh.tets {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.n_tets())?;
    for _ in &mesh.tets {
        writeln!(out, "10")?;
    }
    Ok(())
}
