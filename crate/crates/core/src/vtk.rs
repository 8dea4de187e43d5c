//! Legacy ASCII VTK output of meshes and nodal/element fields.

use std::fmt::Write as _;

use crate::mesh::Mesh;
use crate::{Error, Result};

/// A named data array attached to points or cells.
pub struct Field<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// Unstructured grid with `generation` and any extra cell arrays (for
/// example the indicators) as CELL_DATA and the given POINT_DATA arrays.
pub fn to_vtk(mesh: &Mesh, title: &str, cell_data: &[Field<'_>], point_data: &[Field<'_>]) -> Result<String> {
    let (nv, ne) = (mesh.num_vertices(), mesh.num_elements());
    for f in cell_data {
        if f.values.len() != ne {
            return Err(Error::InvalidArgument(format!("cell array '{}' has {} values", f.name, f.values.len())));
        }
    }
    for f in point_data {
        if f.values.len() != nv {
            return Err(Error::InvalidArgument(format!("point array '{}' has {} values", f.name, f.values.len())));
        }
    }
    let mut s = String::with_capacity(64 * (nv + ne));
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {ne} {}", 4 * ne);
    for e in mesh.elements() {
        let _ = writeln!(s, "3 {} {} {}", e[0], e[1], e[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {ne}");
    s.push_str("SCALARS generation int 1\nLOOKUP_TABLE default\n");
    for g in mesh.generations() {
        let _ = writeln!(s, "{g}");
    }
    write_arrays(&mut s, cell_data);
    if !point_data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        write_arrays(&mut s, point_data);
    }
    Ok(s)
}

fn write_arrays(s: &mut String, fields: &[Field<'_>]) {
    for f in fields {
        let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name.replace(' ', "_"));
        for v in f.values {
            let _ = writeln!(s, "{v:.17e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let m = Mesh::unit_square(1).unwrap();
        let eta = [0.5, 0.25];
        let y = [1.0, 2.0, 3.0, 4.0];
        let s = to_vtk(&m, "t", &[Field { name: "eta", values: &eta }], &[Field { name: "y", values: &y }]).unwrap();
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 2 8"));
        assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
        assert!(s.contains("SCALARS eta double 1"));
        assert!(s.contains("POINT_DATA 4"));
        assert!(to_vtk(&m, "t", &[Field { name: "eta", values: &y }], &[]).is_err());
    }
}
