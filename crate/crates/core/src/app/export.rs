use std::io::{BufWriter, Write};
use std::path::Path;

use crate::assembly::{Discretization, MhdState};
use crate::error::Result;
use crate::geometry::{norm, Vec3};
use crate::space::{eval_at, CellEvaluator, SpaceKind};
use crate::vtk::write_grid_header;

/// Vertex values of the solution fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFields {
    pub velocity: Vec<Vec3>,
    pub pressure: Vec<f64>,
    pub magnetic: Vec<Vec3>,
    pub magnetic_magnitude: Vec<f64>,
}

/// Velocity and pressure are read off their vertex DOFs. The magnetic field
/// is evaluated at cell centroids and averaged onto vertices with volume
/// weights.
pub fn point_fields(disc: &Discretization, state: &MhdState) -> Result<PointFields> {
    let mesh = &disc.mesh;
    let nv = mesh.n_vertices();
    let stride = nv + mesh.n_edges();
    let velocity = (0..nv)
        .map(|v| [state.u.coeffs[v], state.u.coeffs[stride + v], state.u.coeffs[2 * stride + v]])
        .collect();
    let pressure = state.p.coeffs[..nv].to_vec();

    let mut sum = vec![[0.0; 3]; nv];
    let mut weight = vec![0.0; nv];
    let mut ev = CellEvaluator::at_points(SpaceKind::MagneticNed2, &[[0.25; 3]]);
    for (t, tet) in mesh.tets.iter().enumerate() {
        ev.reinit(mesh, t)?;
        let b = eval_at(&state.b, &disc.magnetic, t, &ev.mapped, 0).value;
        let vol = mesh.tet_volume(t);
        for &v in tet {
            for d in 0..3 {
                sum[v][d] += vol * b[d];
            }
            weight[v] += vol;
        }
    }
    let magnetic: Vec<Vec3> = sum
        .iter()
        .zip(&weight)
        .map(|(s, &w)| [s[0] / w, s[1] / w, s[2] / w])
        .collect();
    let magnetic_magnitude = magnetic.iter().map(norm).collect();
    Ok(PointFields {
        velocity,
        pressure,
        magnetic,
        magnetic_magnitude,
    })
}

/// Write `velocity`, `pressure`, `B` and `Bmag` as point data of a legacy
/// ASCII VTK unstructured grid.
pub fn export_vtk(disc: &Discretization, state: &MhdState, path: impl AsRef<Path>) -> Result<()> {
    let fields = point_fields(disc, state)?;
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    write_grid_header(&mut out, &disc.mesh, "mhd solution")?;
    writeln!(out, "POINT_DATA {}", disc.mesh.n_vertices())?;
    let vectors = |out: &mut BufWriter<std::fs::File>, name: &str, v: &[Vec3]| -> std::io::Result<()> {
        writeln!(out, "VECTORS {name} double")?;
        for x in v {
            writeln!(out, "{:.10e} {:.10e} {:.10e}", x[0], x[1], x[2])?;
        }
        Ok(())
    };
    let scalars = |out: &mut BufWriter<std::fs::File>, name: &str, v: &[f64]| -> std::io::Result<()> {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for x in v {
            writeln!(out, "{x:.10e}")?;
        }
        Ok(())
    };
    vectors(&mut out, "velocity", &fields.velocity)?;
    scalars(&mut out, "pressure", &fields.pressure)?;
    vectors(&mut out, "B", &fields.magnetic)?;
    scalars(&mut out, "Bmag", &fields.magnetic_magnitude)?;
    out.flush()?;
    Ok(())
}
