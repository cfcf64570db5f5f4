//! Field output: legacy ASCII VTK for 2D, CSV profiles for 1D.

use std::io::Write;

use super::space::FeSpace;
use crate::error::{invalid, Result};

/// Writes 2D fields as an unstructured grid on the P2 lattice. Every P2
/// triangle becomes four linear triangles through its edge midpoints.
pub fn write_vtk<W: Write>(w: &mut W, space: &FeSpace, title: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    if space.dimension() != 2 {
        return invalid("VTK output is for 2D spaces");
    }
    for (name, f) in fields {
        space.check_len(f, name)?;
    }
    let (coords, dofs) = space.lattice();
    let side = space.lattice_side();
    let n = space.mesh.n;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", coords.len())?;
    for c in coords {
        writeln!(w, "{:.17e} {:.17e} 0", c[0], c[1])?;
    }
    let node = |i: usize, j: usize| j * side + i;
    let mut tris = Vec::with_capacity(8 * n * n);
    for q in 0..n {
        for p in 0..n {
            // the four lattice sub-squares, split along the mesh diagonal direction
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (i, j) = (2 * p + di, 2 * q + dj);
                let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            }
        }
    }
    writeln!(w, "CELLS {} {}", tris.len(), 4 * tris.len())?;
    for t in &tris {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {}", tris.len())?;
    for _ in &tris {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", coords.len())?;
    for (name, f) in fields {
        writeln!(w, "SCALARS {} double 1", name.replace(char::is_whitespace, "_"))?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &d in dofs {
            writeln!(w, "{:.17e}", f[d])?;
        }
    }
    Ok(())
}

/// Writes a 1D field as `x,u` rows ordered by x, periodic copy included.
pub fn write_profile_csv<W: Write>(w: &mut W, space: &FeSpace, u: &[f64]) -> Result<()> {
    if space.dimension() != 1 {
        return invalid("profile output is for 1D spaces");
    }
    space.check_len(u, "profile")?;
    let (coords, dofs) = space.lattice();
    writeln!(w, "x,u")?;
    for (c, &d) in coords.iter().zip(dofs) {
        writeln!(w, "{:.17e},{:.17e}", c[0], u[d])?;
    }
    Ok(())
}
