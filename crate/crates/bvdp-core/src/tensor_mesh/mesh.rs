use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::SymTensor2;
use crate::linalg::reverse_cuthill_mckee;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Dir,
    Neu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v0: usize,
    pub v1: usize,
    pub tag: BoundaryTag,
}

/// Sides of an axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Conforming triangulation of a planar domain with tagged boundary.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    areas: Vec<f64>,
    // Gradients of the three barycentric basis functions per element.
    grads: Vec<[[f64; 2]; 3]>,
    dirichlet_vertex: Vec<bool>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn basis_gradients(p: [[f64; 2]; 3]) -> Result<(f64, [[f64; 2]; 3])> {
    let area = signed_area(p[0], p[1], p[2]);
    let scale = (0..3)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % 3]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            dx * dx + dy * dy
        })
        .fold(0.0, f64::max);
    if !(area.abs() > 1e-14 * scale) {
        return Err(Error::Geometry(format!("degenerate triangle (area {area:e})")));
    }
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (b, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)];
    }
    Ok((area, g))
}

/// Symmetric gradient of a P1 vector field on one triangle given by its
/// vertex coordinates and nodal values.
pub fn sym_grad_triangle(coords: [[f64; 2]; 3], u: [[f64; 2]; 3]) -> Result<SymTensor2> {
    let (_, g) = basis_gradients(coords)?;
    Ok(sym_grad_from(&g, &u))
}

fn sym_grad_from(g: &[[f64; 2]; 3], u: &[[f64; 2]; 3]) -> SymTensor2 {
    let mut du = [[0.0; 2]; 2];
    for a in 0..3 {
        for c in 0..2 {
            for d in 0..2 {
                du[c][d] += u[a][c] * g[a][d];
            }
        }
    }
    SymTensor2::new(du[0][0], du[1][1], 0.5 * (du[0][1] + du[1][0]))
}

impl Mesh {
    /// Validates and builds a mesh. Clockwise triangles are reoriented;
    /// degenerate triangles, non-boundary tagged edges, duplicate tags and
    /// untagged boundary edges are rejected.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (k, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Geometry(format!("triangle {k} references a missing vertex")));
            }
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            if signed_area(p[0], p[1], p[2]) < 0.0 {
                tri.swap(1, 2);
            }
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let (area, g) = basis_gradients(p)
                .map_err(|e| Error::Geometry(format!("triangle {k}: {e}")))?;
            areas.push(area);
            grads.push(g);
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if let Some((e, c)) = edge_count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Geometry(format!("edge {e:?} shared by {c} triangles")));
        }
        let mut tagged: BTreeMap<(usize, usize), BoundaryTag> = BTreeMap::new();
        for be in &boundary {
            let key = (be.v0.min(be.v1), be.v0.max(be.v1));
            if edge_count.get(&key) != Some(&1) {
                return Err(Error::Geometry(format!("tagged edge {key:?} is not a boundary edge")));
            }
            if tagged.insert(key, be.tag).is_some() {
                return Err(Error::Geometry(format!("boundary edge {key:?} tagged twice")));
            }
        }
        if let Some((e, _)) = edge_count.iter().find(|(e, &c)| c == 1 && !tagged.contains_key(e)) {
            return Err(Error::Geometry(format!("boundary edge {e:?} carries no tag")));
        }
        let mut dirichlet_vertex = vec![false; nv];
        for be in boundary.iter().filter(|b| b.tag == BoundaryTag::Dir) {
            dirichlet_vertex[be.v0] = true;
            dirichlet_vertex[be.v1] = true;
        }
        Ok(Self { vertices, triangles, boundary, areas, grads, dirichlet_vertex })
    }

    /// Structured `nx × ny` triangulation of `[x0,x1]×[y0,y1]` with two
    /// triangles per cell and diagonals alternating in a checkerboard
    /// pattern. Edges on the listed sides are Dirichlet, the rest Neumann.
    pub fn rectangle(
        nx: usize,
        ny: usize,
        lower: [f64; 2],
        upper: [f64; 2],
        dirichlet: &[Side],
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Parameter("rectangle needs nx, ny >= 1".into()));
        }
        if !(upper[0] > lower[0] && upper[1] > lower[1]) {
            return Err(Error::Geometry("empty rectangle".into()));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    lower[0] + (upper[0] - lower[0]) * i as f64 / nx as f64,
                    lower[1] + (upper[1] - lower[1]) * j as f64 / ny as f64,
                ]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        let tag = |s: Side| {
            if dirichlet.contains(&s) {
                BoundaryTag::Dir
            } else {
                BoundaryTag::Neu
            }
        };
        let mut boundary = Vec::new();
        for i in 0..nx {
            boundary.push(BoundaryEdge { v0: id(i, 0), v1: id(i + 1, 0), tag: tag(Side::Bottom) });
            boundary.push(BoundaryEdge { v0: id(i + 1, ny), v1: id(i, ny), tag: tag(Side::Top) });
        }
        for j in 0..ny {
            boundary.push(BoundaryEdge { v0: id(nx, j), v1: id(nx, j + 1), tag: tag(Side::Right) });
            boundary.push(BoundaryEdge { v0: id(0, j + 1), v1: id(0, j), tag: tag(Side::Left) });
        }
        Self::new(vertices, triangles, boundary)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Gradients of the barycentric basis functions on element `t`.
    pub fn basis_grads(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }

    pub fn element_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn is_dirichlet_vertex(&self, v: usize) -> bool {
        self.dirichlet_vertex[v]
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet_vertex.iter().any(|&d| d)
    }

    /// Longest element edge.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.n_elements() {
            let p = self.element_coords(t);
            for i in 0..3 {
                let (a, b) = (p[i], p[(i + 1) % 3]);
                h = h.max(libm::hypot(b[0] - a[0], b[1] - a[1]));
            }
        }
        h
    }

    /// Diameter of the vertex set's bounding box.
    pub fn bounding_diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for c in 0..2 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        libm::hypot(hi[0] - lo[0], hi[1] - lo[1])
    }

    /// `E(u)` on element `t`, with `u` a full nodal vector `[u0x, u0y, u1x, …]`.
    pub fn sym_grad(&self, u: &[f64], t: usize) -> Result<SymTensor2> {
        if t >= self.n_elements() {
            return Err(Error::Contract(format!("element index {t} out of range")));
        }
        Ok(self.sym_grad_unchecked(u, t))
    }

    #[inline]
    pub(crate) fn sym_grad_unchecked(&self, u: &[f64], t: usize) -> SymTensor2 {
        let tri = self.triangles[t];
        let nodal = [
            [u[2 * tri[0]], u[2 * tri[0] + 1]],
            [u[2 * tri[1]], u[2 * tri[1] + 1]],
            [u[2 * tri[2]], u[2 * tri[2] + 1]],
        ];
        sym_grad_from(&self.grads[t], &nodal)
    }

    /// Gradient of a P1 scalar field on element `t`.
    pub fn scalar_grad(&self, z: &[f64], t: usize) -> [f64; 2] {
        let tri = self.triangles[t];
        let g = &self.grads[t];
        let mut out = [0.0; 2];
        for a in 0..3 {
            out[0] += z[tri[a]] * g[a][0];
            out[1] += z[tri[a]] * g[a][1];
        }
        out
    }

    /// Element average of a P1 scalar field.
    pub fn element_mean(&self, z: &[f64], t: usize) -> f64 {
        let tri = self.triangles[t];
        (z[tri[0]] + z[tri[1]] + z[tri[2]]) / 3.0
    }

    pub fn element_means(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n_elements()).map(|t| self.element_mean(z, t)).collect()
    }

    /// Vertex adjacency lists (vertices sharing an element).
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for tri in &self.triangles {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j && !adj[tri[i]].contains(&tri[j]) {
                        adj[tri[i]].push(tri[j]);
                    }
                }
            }
        }
        adj
    }
}

/// Degree-of-freedom bookkeeping for the three unknown fields.
///
/// Displacement dofs are numbered vertex-wise after a reverse Cuthill–McKee
/// ordering so the stiffness matrix has a narrow band.
#[derive(Clone, Debug)]
pub struct FieldLayout {
    pub n_vertices: usize,
    pub n_elements: usize,
    /// For each full displacement dof `2v + c`, its free index if not
    /// Dirichlet-constrained.
    pub u_free: Vec<Option<usize>>,
    /// Inverse of `u_free`.
    pub u_free_to_full: Vec<usize>,
    /// Half-bandwidth of the free-dof stiffness pattern.
    pub u_bandwidth: usize,
}

impl FieldLayout {
    pub fn new(mesh: &Mesh) -> Self {
        let nv = mesh.n_vertices();
        let order = reverse_cuthill_mckee(&mesh.vertex_adjacency());
        let mut u_free = vec![None; 2 * nv];
        let mut u_free_to_full = Vec::new();
        for &v in &order {
            if mesh.is_dirichlet_vertex(v) {
                continue;
            }
            for c in 0..2 {
                u_free[2 * v + c] = Some(u_free_to_full.len());
                u_free_to_full.push(2 * v + c);
            }
        }
        let mut bw = 0;
        for tri in mesh.triangles() {
            let ids: Vec<usize> = tri
                .iter()
                .flat_map(|&v| [2 * v, 2 * v + 1])
                .filter_map(|d| u_free[d])
                .collect();
            for &a in &ids {
                for &b in &ids {
                    bw = bw.max(a.abs_diff(b));
                }
            }
        }
        Self {
            n_vertices: nv,
            n_elements: mesh.n_elements(),
            u_free,
            u_free_to_full,
            u_bandwidth: bw,
        }
    }

    pub fn n_u_free(&self) -> usize {
        self.u_free_to_full.len()
    }

    pub fn n_u_full(&self) -> usize {
        2 * self.n_vertices
    }

    pub fn n_z(&self) -> usize {
        self.n_vertices
    }

    /// Independent components of the deviatoric P0 plastic strain.
    pub fn n_p(&self) -> usize {
        2 * self.n_elements
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.u_free_to_full.iter().map(|&d| full[d]).collect()
    }

    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_u_full()];
        for (k, &d) in self.u_free_to_full.iter().enumerate() {
            full[d] = free[k];
        }
        full
    }
}
