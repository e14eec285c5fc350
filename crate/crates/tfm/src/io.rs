//! CSV, legacy VTK and Matrix Market files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tfm_core::experiments::GridData;
use tfm_core::fem::FeSpace;
use tfm_core::linalg::CsrMatrix;
use tfm_core::mesh::{CellKind, Mesh};

use crate::CliError;

const COORDS: [&str; 3] = ["x", "y", "z"];

/// Column names for a nodal field: `x,y,ux,uy` style headers.
pub fn header(coord_dim: usize, prefix: &str, components: usize) -> Vec<String> {
    let mut h: Vec<String> = COORDS[..coord_dim].iter().map(|s| s.to_string()).collect();
    h.extend(COORDS[..components].iter().map(|c| format!("{prefix}{c}")));
    h
}

/// Writes one row per node: coordinates, then the nodal values.
pub fn write_field_csv(path: &Path, space: &FeSpace, coeffs: &[f64], prefix: &str) -> Result<(), CliError> {
    let dim = space.mesh().dim();
    let vd = space.value_dim();
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header(dim, prefix, vd)).map_err(|e| CliError::io(path, e))?;
    let mut row = Vec::with_capacity(dim + vd);
    for (n, x) in space.nodes().iter().enumerate() {
        row.clear();
        row.extend(x[..dim].iter().map(|v| fmt_f64(*v)));
        row.extend(coeffs[n * vd..(n + 1) * vd].iter().map(|v| fmt_f64(*v)));
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Shortest representation that reads back to the same bits; `-0` is
/// normalised so identical fields give identical files.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// Reads a regular-grid CSV whose header is `x,y[,z]` followed by the value
/// columns `{prefix}x, {prefix}y[, {prefix}z]`.
pub fn read_grid_csv(path: &Path, coord_dim: usize, prefix: &str, components: usize) -> Result<GridData, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let expected = header(coord_dim, prefix, components);
    let found: Vec<String> = r
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    if found != expected {
        return Err(CliError::Input(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            expected.join(","),
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let row: Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
        match row {
            Ok(v) if v.iter().all(|x| x.is_finite()) => rows.push(v),
            _ => return Err(CliError::Input(format!("{}: row {} is not numeric", path.display(), i + 2))),
        }
    }
    GridData::from_samples(coord_dim, components, &rows).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn lattice_shape(space: &FeSpace) -> Option<Vec<usize>> {
    let dim = space.mesh().dim();
    let shape: Vec<usize> = (0..dim)
        .map(|d| {
            let mut a: Vec<f64> = space.nodes().iter().map(|x| x[d]).collect();
            a.sort_by(f64::total_cmp);
            a.dedup_by(|p, q| (*p - *q).abs() <= 1e-9 * (1.0 + q.abs()));
            a.len()
        })
        .collect();
    (shape.iter().product::<usize>() == space.num_nodes()).then_some(shape)
}

/// Legacy VTK 3.0 ASCII unstructured grid over the node lattice of
/// `space`, with one vector point field per entry of `fields`.
pub fn write_field_vtk(path: &Path, title: &str, space: &FeSpace, fields: &[(&str, &[f64])]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    writeln!(w, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").map_err(io)?;
    writeln!(w, "POINTS {} double", space.num_nodes()).map_err(io)?;
    for x in space.nodes() {
        writeln!(w, "{} {} {}", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(x[2])).map_err(io)?;
    }
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let kind = match lattice_shape(space) {
        Some(s) if s.len() == 2 => {
            for j in 0..s[1] - 1 {
                for i in 0..s[0] - 1 {
                    let v = |i: usize, j: usize| j * s[0] + i;
                    cells.push(vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
                }
            }
            9
        }
        Some(s) => {
            let v = |i: usize, j: usize, k: usize| (k * s[1] + j) * s[0] + i;
            for k in 0..s[2] - 1 {
                for j in 0..s[1] - 1 {
                    for i in 0..s[0] - 1 {
                        cells.push(vec![
                            v(i, j, k),
                            v(i + 1, j, k),
                            v(i + 1, j + 1, k),
                            v(i, j + 1, k),
                            v(i, j, k + 1),
                            v(i + 1, j, k + 1),
                            v(i + 1, j + 1, k + 1),
                            v(i, j + 1, k + 1),
                        ]);
                    }
                }
            }
            12
        }
        None => {
            cells.extend((0..space.num_nodes()).map(|n| vec![n]));
            1
        }
    };
    write_cells(&mut w, &cells, kind).map_err(io)?;
    writeln!(w, "POINT_DATA {}", space.num_nodes()).map_err(io)?;
    let vd = space.value_dim();
    for (name, values) in fields {
        writeln!(w, "VECTORS {name} double").map_err(io)?;
        for n in 0..space.num_nodes() {
            let mut v = [0.0; 3];
            v[..vd].copy_from_slice(&values[n * vd..(n + 1) * vd]);
            writeln!(w, "{} {} {}", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2])).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn write_cells(w: &mut impl Write, cells: &[Vec<usize>], kind: u8) -> std::io::Result<()> {
    let size: usize = cells.iter().map(|c| c.len() + 1).sum();
    writeln!(w, "CELLS {} {size}", cells.len())?;
    for c in cells {
        write!(w, "{}", c.len())?;
        for v in c {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(w, "{kind}")?;
    }
    Ok(())
}

/// The mesh itself with its true cells.
pub fn write_mesh_vtk(path: &Path, title: &str, mesh: &Mesh) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    writeln!(w, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").map_err(io)?;
    writeln!(w, "POINTS {} double", mesh.vertices().len()).map_err(io)?;
    for x in mesh.vertices() {
        writeln!(w, "{} {} {}", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(x[2])).map_err(io)?;
    }
    let cells: Vec<Vec<usize>> = mesh.cells().map(<[usize]>::to_vec).collect();
    let kind = match mesh.kind() {
        CellKind::Triangle => 5,
        CellKind::Quadrilateral => 9,
        CellKind::Hexahedron => 12,
    };
    write_cells(&mut w, &cells, kind).map_err(io)?;
    w.flush().map_err(io)
}

/// Coordinate-format Matrix Market file, one-based indices.
pub fn write_matrix_market(path: &Path, m: &CsrMatrix) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz()).map_err(io)?;
    for r in 0..m.nrows() {
        for (c, v) in m.row(r) {
            writeln!(w, "{} {} {}", r + 1, c + 1, fmt_f64(v)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use tfm_core::mesh::build_rect_mesh;

    #[test]
    fn csv_round_trip_through_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let space = FeSpace::new(Arc::new(build_rect_mesh(1.0, 3, 2).unwrap()), 2, 2).unwrap();
        let u = space.interpolate(|x| [x[0] + 2.0 * x[1], -x[1], 0.0]);
        write_field_csv(&path, &space, &u, "u").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,ux,uy\n"));
        let grid = read_grid_csv(&path, 2, "u", 2).unwrap();
        assert_eq!(grid.axis(0).len(), 7);
        assert_eq!(grid.axis(1).len(), 5);
        let back = grid.interpolate_onto(&space).unwrap();
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(&path, "x,y,tx,ty\n0,0,1,1\n").unwrap();
        let e = read_grid_csv(&path, 2, "u", 2).unwrap_err();
        assert!(e.to_string().contains("expected header `x,y,ux,uy`"));
    }

    #[test]
    fn non_numeric_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(&path, "x,y,ux,uy\n0,0,1,1\n1,0,a,1\n").unwrap();
        assert!(read_grid_csv(&path, 2, "u", 2).unwrap_err().to_string().contains("row 3"));
    }

    #[test]
    fn vtk_sections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        let space = FeSpace::new(Arc::new(build_rect_mesh(1.0, 2, 2).unwrap()), 1, 2).unwrap();
        let u = vec![1.0; space.num_dofs()];
        write_field_vtk(&path, "test", &space, &[("u", &u)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\ntest\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 9 double\n"));
        assert!(text.contains("CELLS 4 20\n"));
        assert!(text.contains("CELL_TYPES 4\n9\n"));
        assert!(text.contains("POINT_DATA 9\nVECTORS u double\n1 1 0\n"));

        let mesh_path = dir.path().join("m.vtk");
        write_mesh_vtk(&mesh_path, "mesh", space.mesh()).unwrap();
        let text = std::fs::read_to_string(&mesh_path).unwrap();
        assert!(text.contains("CELLS 8 32\n"));
    }

    #[test]
    fn matrix_market_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.mtx");
        write_matrix_market(&path, &CsrMatrix::from_dense(2, 2, &[1.0, 0.0, -2.5, 3.0])).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n"));
    }
}
