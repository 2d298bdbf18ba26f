//! Legacy ASCII VTK snapshots of the deformed meshes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::TetMesh;
use crate::math::Vec3;

const VTK_TETRA: u8 = 10;

/// Writes the mesh at positions `x` with nodal `velocity` and body ids.
///
/// Numbers are printed with round-trip precision so identical states give
/// identical bytes.
pub fn write_vtk<W: Write>(
    mut out: W,
    mesh: &TetMesh,
    x: &[Vec3],
    velocity: &[Vec3],
    title: &str,
) -> std::io::Result<()> {
    let n = mesh.node_count();
    assert!(
        x.len() == n && velocity.len() == n,
        "snapshot arrays must match the mesh"
    );
    // the title line must be a single line
    let title: String = title.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for p in x {
        writeln!(out, "{:e} {:e} {:e}", p.x, p.y, p.z)?;
    }
    let tets = mesh.tets();
    writeln!(out, "CELLS {} {}", tets.len(), 5 * tets.len())?;
    for [a, b, c, d] in tets {
        writeln!(out, "4 {a} {b} {c} {d}")?;
    }
    writeln!(out, "CELL_TYPES {}", tets.len())?;
    for _ in tets {
        writeln!(out, "{VTK_TETRA}")?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    writeln!(out, "VECTORS velocity double")?;
    for v in velocity {
        writeln!(out, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
    }
    writeln!(out, "SCALARS body_id int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for b in mesh.node_body() {
        writeln!(out, "{b}")?;
    }
    Ok(())
}

pub fn write_snapshot(path: &Path, mesh: &TetMesh, x: &[Vec3], velocity: &[Vec3], title: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_vtk(&mut out, mesh, x, velocity, title)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}
