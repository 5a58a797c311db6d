//! Minimal legacy-VTK (ASCII) writer for per-side nodal fields.

use crate::geometry::Side;
use crate::mesh::Mesh;
use crate::space::DofMap;
use std::io::Write;

/// Writes the triangles of one side's fictitious domain as an unstructured
/// grid with one or more nodal scalar fields.
pub fn write_side_vtk<W: Write>(
    mut w: W,
    mesh: &Mesh,
    dofmap: &DofMap,
    covers: &[usize],
    side: Side,
    fields: &[(&str, &dyn Fn(u32) -> f64)],
    title: &str,
) -> std::io::Result<()> {
    // collect this side's nodes in dof order
    let mut local_of_vertex = vec![u32::MAX; mesh.n_vertices()];
    let mut nodes = Vec::new();
    for (local, dof) in dofmap.side_dofs(side).enumerate() {
        let (_, v) = dofmap.node(dof);
        local_of_vertex[v as usize] = local as u32;
        nodes.push((dof, v));
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", nodes.len())?;
    for &(_, v) in &nodes {
        let p = mesh.vertices[v as usize];
        writeln!(w, "{} {} 0", p.x, p.y)?;
    }
    writeln!(w, "CELLS {} {}", covers.len(), covers.len() * 4)?;
    for &t in covers {
        let tri = mesh.triangles[t];
        writeln!(
            w,
            "3 {} {} {}",
            local_of_vertex[tri[0]], local_of_vertex[tri[1]], local_of_vertex[tri[2]]
        )?;
    }
    writeln!(w, "CELL_TYPES {}", covers.len())?;
    for _ in covers {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", nodes.len())?;
    for (name, f) in fields {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &(dof, _) in &nodes {
            writeln!(w, "{}", f(dof))?;
        }
    }
    Ok(())
}
