//! Plain-text meshes.
//!
//! ```text
//! vertices 4 elements 2 boundary_edges 4
//! 0 0
//! 1 0
//! 1 1
//! 0 1
//! 0 1 2
//! 0 2 3
//! 0 1 neu
//! 1 2 dir
//! 2 3 neu
//! 3 0 dir
//! ```
//!
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;

use bvdp_core::tensor_mesh::{BoundaryEdge, BoundaryTag, Mesh};

use crate::error::{Result, RunError};

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(RunError::io(path))?;
    parse_mesh(&text).map_err(|m| match m {
        RunError::Config(msg) => RunError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let bad = |m: String| RunError::Config(m);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad("empty mesh file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let count = |key: &str| -> Result<usize> {
        let i = h.iter().position(|t| *t == key).ok_or_else(|| bad(format!("header lacks `{key}`")))?;
        h.get(i + 1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("header: `{key}` needs a count")))
    };
    let (nv, ne, nb) = (count("vertices")?, count("elements")?, count("boundary_edges")?);

    let mut next = |what: &str, k: usize| {
        lines.next().ok_or_else(|| bad(format!("expected {what} {k}, found end of file")))
    };
    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (ln, l) = next("vertex", k)?;
        let v: Vec<f64> = l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {ln}: {e}")))?;
        if v.len() != 2 {
            return Err(bad(format!("line {ln}: a vertex needs two coordinates")));
        }
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::with_capacity(ne);
    for k in 0..ne {
        let (ln, l) = next("element", k)?;
        let v: Vec<usize> = l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {ln}: {e}")))?;
        if v.len() != 3 {
            return Err(bad(format!("line {ln}: an element needs three vertex indices")));
        }
        triangles.push([v[0], v[1], v[2]]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for k in 0..nb {
        let (ln, l) = next("boundary edge", k)?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad(format!("line {ln}: a boundary edge is `v0 v1 tag`")));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("line {ln}: {e}")));
        let tag = match t[2] {
            "dir" => BoundaryTag::Dir,
            "neu" => BoundaryTag::Neu,
            other => return Err(bad(format!("line {ln}: unknown tag `{other}`"))),
        };
        boundary.push(BoundaryEdge { v0: idx(t[0])?, v1: idx(t[1])?, tag });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(bad(format!("line {ln}: trailing data after the boundary edges")));
    }
    Mesh::new(vertices, triangles, boundary).map_err(|e| bad(e.to_string()))
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "vertices {} elements {} boundary_edges {}",
        mesh.n_vertices(),
        mesh.n_elements(),
        mesh.boundary_edges().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in mesh.boundary_edges() {
        let tag = match e.tag {
            BoundaryTag::Dir => "dir",
            BoundaryTag::Neu => "neu",
        };
        let _ = writeln!(s, "{} {} {tag}", e.v0, e.v1);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use bvdp_core::tensor_mesh::Side;

    const SQUARE: &str = "vertices 4 elements 2 boundary_edges 4\n\
        0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1 neu\n1 2 dir\n2 3 neu\n3 0 dir\n";

    #[test]
    fn reads_the_unit_square() {
        let m = parse_mesh(SQUARE).unwrap();
        assert_eq!((m.n_vertices(), m.n_elements()), (4, 2));
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let dir = m.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Dir).count();
        assert_eq!(dir, 2);
    }

    #[test]
    fn round_trip_of_a_generated_mesh() {
        let m = Mesh::rectangle(3, 2, [0.0, 0.0], [1.5, 1.0], &[Side::Left]).unwrap();
        let back = parse_mesh(&format_mesh(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!("# square\n\n{}", SQUARE.replace("0 0\n", "0 0   # origin\n\n"));
        assert_eq!(parse_mesh(&text).unwrap().n_vertices(), 4);
    }

    #[test]
    fn malformed_files_are_config_errors() {
        for text in [
            "",
            "vertices 4 elements 2",
            &SQUARE.replace("0 1 neu", "0 1 free"),
            &SQUARE.replace("0 2 3\n", "0 2\n"),
            &format!("{SQUARE}1 2\n"),
            &SQUARE.replace("boundary_edges 4", "boundary_edges 5"),
            &SQUARE.replace("1 1\n", "0.5 0\n"),
        ] {
            assert!(matches!(parse_mesh(text), Err(RunError::Config(_))), "{text}");
        }
    }
}
