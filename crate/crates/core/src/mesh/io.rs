//! Plain-text mesh files and legacy VTK output.
//!
//! Mesh file layout (whitespace separated, `#` starts a comment, vertex
//! indices are 0-based):
//!
//! ```text
//! nv nc nb
//! x y            (nv lines)
//! v0 v1 v2       (nc lines)
//! v0 v1 D|N      (nb lines)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{edge_key, BoundaryCurve, BoundaryTag, GridHierarchy, Point, Triangulation};
use crate::error::{Error, Result};

/// Contents of a mesh file.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshData {
    pub coords: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub boundary: HashMap<(usize, usize), BoundaryTag>,
}

impl MeshData {
    pub fn into_hierarchy(self, curve: Option<BoundaryCurve>) -> Result<GridHierarchy> {
        GridHierarchy::new(self.coords, &self.cells, self.boundary, curve)
    }

    /// Boundary data of an active triangulation (sub-facets are not merged).
    pub fn from_triangulation(mesh: &Triangulation) -> Self {
        let boundary = mesh
            .facets
            .iter()
            .filter(|f| f.is_boundary())
            .map(|f| (edge_key(f.vertices[0], f.vertices[1]), f.boundary_tag))
            .collect();
        Self {
            coords: mesh.vertices.iter().map(|v| v.coords).collect(),
            cells: mesh.cells.iter().map(|c| c.vertex_ids).collect(),
            boundary,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MeshParse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_mesh(text: &str) -> Result<MeshData> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .map(|(n, l)| (n, l.split_whitespace().collect::<Vec<_>>()))
            .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {what}")))
    };
    fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| parse_err(line, format!("invalid number `{tok}`")))
    }
    fn arity(line: usize, toks: &[&str], n: usize) -> Result<()> {
        if toks.len() == n {
            Ok(())
        } else {
            Err(parse_err(line, format!("expected {n} fields, found {}", toks.len())))
        }
    }

    let (n, h) = next("header")?;
    arity(n, &h, 3)?;
    let (nv, nc, nb): (usize, usize, usize) = (num(n, h[0])?, num(n, h[1])?, num(n, h[2])?);
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, t) = next("vertex")?;
        arity(n, &t, 2)?;
        coords.push([num(n, t[0])?, num(n, t[1])?]);
    }
    let idx = |n: usize, tok: &str| -> Result<usize> {
        let v: usize = num(n, tok)?;
        if v >= nv {
            return Err(parse_err(n, format!("vertex index {v} out of range")));
        }
        Ok(v)
    };
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (n, t) = next("cell")?;
        arity(n, &t, 3)?;
        cells.push([idx(n, t[0])?, idx(n, t[1])?, idx(n, t[2])?]);
    }
    let mut boundary = HashMap::with_capacity(nb);
    for _ in 0..nb {
        let (n, t) = next("boundary edge")?;
        arity(n, &t, 3)?;
        let tag = match t[2] {
            "D" => BoundaryTag::Dirichlet,
            "N" => BoundaryTag::Neumann,
            other => return Err(parse_err(n, format!("unknown boundary tag `{other}`"))),
        };
        boundary.insert(edge_key(idx(n, t[0])?, idx(n, t[1])?), tag);
    }
    if let Some((n, _)) = next("nothing").ok() {
        return Err(parse_err(n, "trailing data"));
    }
    Ok(MeshData {
        coords,
        cells,
        boundary,
    })
}

pub fn read_mesh(path: &Path) -> Result<MeshData> {
    if !path.exists() {
        return Err(Error::MeshFileMissing(path.to_path_buf()));
    }
    parse_mesh(&std::fs::read_to_string(path)?)
}

pub fn format_mesh(data: &MeshData) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", data.coords.len(), data.cells.len(), data.boundary.len());
    for p in &data.coords {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    for c in &data.cells {
        let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
    }
    let mut edges: Vec<_> = data.boundary.iter().collect();
    edges.sort_unstable_by_key(|(e, _)| **e);
    for ((a, b), tag) in edges {
        let t = match tag {
            BoundaryTag::Neumann => "N",
            _ => "D",
        };
        let _ = writeln!(s, "{a} {b} {t}");
    }
    s
}

pub fn write_mesh(path: &Path, data: &MeshData) -> Result<()> {
    std::fs::write(path, format_mesh(data))?;
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with named point and cell fields.
pub fn format_vtk(
    mesh: &Triangulation,
    point_data: &[(&str, &[f64])],
    cell_data: &[(&str, &[f64])],
) -> String {
    let mut s = String::new();
    let nv = mesh.num_vertices();
    let nc = mesh.num_cells();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nstabfem\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e} 0", v.coords[0], v.coords[1]);
    }
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for c in &mesh.cells {
        let [a, b, d] = c.vertex_ids;
        let _ = writeln!(s, "3 {a} {b} {d}");
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        let _ = writeln!(s, "5");
    }
    let mut section = |header: &str, n: usize, fields: &[(&str, &[f64])]| {
        if fields.is_empty() {
            return;
        }
        let _ = writeln!(s, "{header} {n}");
        for (name, values) in fields {
            debug_assert_eq!(values.len(), n, "field {name} has the wrong length");
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(s, "{v:e}");
            }
        }
    };
    section("POINT_DATA", nv, point_data);
    section("CELL_DATA", nc, cell_data);
    s
}

pub fn write_vtk(
    path: &Path,
    mesh: &Triangulation,
    point_data: &[(&str, &[f64])],
    cell_data: &[(&str, &[f64])],
) -> Result<()> {
    std::fs::write(path, format_vtk(mesh, point_data, cell_data))?;
    Ok(())
}
