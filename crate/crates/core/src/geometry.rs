//! Uniform triangulations of the unit square with full edge topology.
//!
//! The square is cut into `n × n` cells and every cell is split along its
//! diagonal of positive slope. Vertex `(i, j)` sits at `(i/n, j/n)` and has
//! index `j (n + 1) + i`; cell `(i, j)` owns triangles `2 (j n + i)` (below the
//! diagonal) and `2 (j n + i) + 1` (above it). Both are counterclockwise.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::Vec2;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Interior => "interior",
            EdgeKind::Boundary => "boundary",
        }
    }
}

/// One side of an edge: a triangle and the local index of the edge in it.
///
/// Local edge `l` of a triangle is the one opposite its local vertex `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSide {
    pub triangle: usize,
    pub local_edge: usize,
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoints in the counterclockwise order of the `plus` triangle.
    pub endpoints: [usize; 2],
    pub kind: EdgeKind,
    /// The adjacent triangle with the smaller index (K⁺).
    pub plus: EdgeSide,
    /// The second adjacent triangle (K⁻), absent on the boundary.
    pub minus: Option<EdgeSide>,
    /// Outward unit normal of the `plus` triangle.
    pub unit_normal: Vec2,
    pub length: f64,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.kind == EdgeKind::Interior
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    lattice: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    triangle_edges: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    n_subdiv: usize,
    h: f64,
}

/// Builds the uniform `n_subdiv × n_subdiv` triangulation of `[0, 1]²`.
pub fn build_uniform_mesh(n_subdiv: usize) -> Result<Mesh> {
    Mesh::uniform(n_subdiv)
}

/// Splits the edges of `mesh` into (interior, boundary) index lists.
pub fn classify_edges(mesh: &Mesh) -> (Vec<usize>, Vec<usize>) {
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for (i, e) in mesh.edges.iter().enumerate() {
        match e.kind {
            EdgeKind::Interior => interior.push(i),
            EdgeKind::Boundary => boundary.push(i),
        }
    }
    (interior, boundary)
}

/// Returns the triangle of `coarse` that contains triangle `fine_tri` of `fine`.
pub fn containing_coarse_triangle(fine: &Mesh, coarse: &Mesh, fine_tri: usize) -> Result<usize> {
    check_nested(coarse, fine)?;
    Ok(coarse.locate(fine.barycenter(fine_tri)))
}

/// Coarse containing triangle for every fine triangle.
pub fn coarse_triangle_map(fine: &Mesh, coarse: &Mesh) -> Result<Vec<usize>> {
    check_nested(coarse, fine)?;
    Ok((0..fine.n_triangles())
        .map(|t| coarse.locate(fine.barycenter(t)))
        .collect())
}

fn check_nested(coarse: &Mesh, fine: &Mesh) -> Result<()> {
    if !fine.n_subdiv.is_multiple_of(coarse.n_subdiv) {
        return Err(Error::NotNested {
            coarse: coarse.n_subdiv,
            fine: fine.n_subdiv,
        });
    }
    Ok(())
}

impl Mesh {
    pub fn uniform(n_subdiv: usize) -> Result<Self> {
        if n_subdiv == 0 {
            return Err(Error::EmptyMesh);
        }
        let n = n_subdiv;
        let nf = n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        let mut lattice = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / nf, j as f64 / nf]);
                lattice.push([i, j]);
            }
        }
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (p00, p10, p01, p11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(3 * n * n + 2 * n);
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * n * n + 2 * n);
        for (t, tri) in triangles.iter().enumerate() {
            for l in 0..3 {
                let a = tri[(l + 1) % 3];
                let b = tri[(l + 2) % 3];
                let key = (a.min(b), a.max(b));
                let side = EdgeSide {
                    triangle: t,
                    local_edge: l,
                };
                match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        edge.minus = Some(side);
                        edge.kind = EdgeKind::Interior;
                        triangle_edges[t][l] = e;
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let d = [pb[0] - pa[0], pb[1] - pa[1]];
                        let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
                        let e = edges.len();
                        edges.push(Edge {
                            endpoints: [a, b],
                            kind: EdgeKind::Boundary,
                            plus: side,
                            minus: None,
                            unit_normal: [d[1] / length, -d[0] / length],
                            length,
                        });
                        lookup.insert(key, e);
                        triangle_edges[t][l] = e;
                    }
                }
            }
        }

        Ok(Self {
            vertices,
            lattice,
            triangles,
            triangle_edges,
            edges,
            n_subdiv,
            h: 1.0 / nf,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Integer lattice coordinates `(i, j)` of each vertex.
    pub fn vertex_lattice(&self) -> &[[usize; 2]] {
        &self.lattice
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge index of each local edge of each triangle.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn n_subdiv(&self) -> usize {
        self.n_subdiv
    }

    /// Side length of the square cells, `1 / n_subdiv`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn barycenter(&self, t: usize) -> Point {
        let [p0, p1, p2] = self.triangle_points(t);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Outward unit normal of local edge `l` of triangle `t`.
    pub fn outward_normal(&self, t: usize, l: usize) -> Vec2 {
        let tri = self.triangles[t];
        let pa = self.vertices[tri[(l + 1) % 3]];
        let pb = self.vertices[tri[(l + 2) % 3]];
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        [d[1] / len, -d[0] / len]
    }

    /// Index of a triangle whose closure contains `p`. Points on shared
    /// edges resolve to one of the neighbours.
    pub fn locate(&self, p: Point) -> usize {
        let n = self.n_subdiv;
        let nf = n as f64;
        let sx = (p[0] * nf).clamp(0.0, nf);
        let sy = (p[1] * nf).clamp(0.0, nf);
        let i = (sx.floor() as usize).min(n - 1);
        let j = (sy.floor() as usize).min(n - 1);
        let (lx, ly) = (sx - i as f64, sy - j as f64);
        let cell = 2 * (j * n + i);
        if lx >= ly {
            cell
        } else {
            cell + 1
        }
    }

    /// Plain-text dump: `v x y`, `t i j k`, `e i j kind`, one entity per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.edges {
            let _ = writeln!(s, "e {} {} {}", e.endpoints[0], e.endpoints[1], e.kind.as_str());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_boundary(p: Point) -> bool {
        p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0
    }

    #[test]
    fn rejects_zero_subdivisions() {
        assert!(matches!(build_uniform_mesh(0), Err(Error::EmptyMesh)));
    }

    #[test]
    fn single_cell() {
        let m = build_uniform_mesh(1).unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.edges().len(), 5);
        let (interior, boundary) = classify_edges(&m);
        assert_eq!(interior.len(), 1);
        assert_eq!(boundary.len(), 4);
        let diag = &m.edges()[interior[0]];
        let ends = [m.vertices()[diag.endpoints[0]], m.vertices()[diag.endpoints[1]]];
        assert!(ends.contains(&[0.0, 0.0]) && ends.contains(&[1.0, 1.0]));
    }

    #[test]
    fn two_by_two_counts() {
        let m = build_uniform_mesh(2).unwrap();
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.edges().len(), 16);
        let (interior, boundary) = classify_edges(&m);
        assert_eq!((interior.len(), boundary.len()), (8, 8));
        let euler = m.n_triangles() as i64 - m.edges().len() as i64 + m.n_vertices() as i64;
        assert_eq!(euler, 1);
    }

    #[test]
    fn mesh_size_is_cell_side() {
        assert_eq!(build_uniform_mesh(4).unwrap().h(), 0.25);
    }

    #[test]
    fn invariants_hold_for_several_sizes() {
        for n in [1, 2, 3, 4, 8, 16] {
            let m = build_uniform_mesh(n).unwrap();
            assert_eq!(m.n_triangles(), 2 * n * n);
            assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
            let euler = m.n_triangles() as i64 - m.edges().len() as i64 + m.n_vertices() as i64;
            assert_eq!(euler, 1);

            let expected = 1.0 / (2.0 * (n * n) as f64);
            let mut total = 0.0;
            for t in 0..m.n_triangles() {
                let a = m.signed_area(t);
                assert!((a - expected).abs() < 1e-15);
                total += a;
            }
            assert!((total - 1.0).abs() < 1e-14);

            let (interior, boundary) = classify_edges(&m);
            assert_eq!(interior.len() + boundary.len(), m.edges().len());
            for e in m.edges() {
                let a = m.vertices()[e.endpoints[0]];
                let b = m.vertices()[e.endpoints[1]];
                let geometric_boundary = on_boundary(a)
                    && on_boundary(b)
                    && (a[0] == b[0] && (a[0] == 0.0 || a[0] == 1.0)
                        || a[1] == b[1] && (a[1] == 0.0 || a[1] == 1.0));
                assert_eq!(e.kind == EdgeKind::Boundary, geometric_boundary);
                assert_eq!(e.minus.is_none(), e.kind == EdgeKind::Boundary);

                let d = [b[0] - a[0], b[1] - a[1]];
                assert!((e.unit_normal[0].hypot(e.unit_normal[1]) - 1.0).abs() < 1e-15);
                assert!((e.unit_normal[0] * d[0] + e.unit_normal[1] * d[1]).abs() < 1e-15);
                assert_eq!(e.unit_normal, m.outward_normal(e.plus.triangle, e.plus.local_edge));
                if let Some(minus) = e.minus {
                    assert!(e.plus.triangle < minus.triangle);
                    let nm = m.outward_normal(minus.triangle, minus.local_edge);
                    assert_eq!(nm[0] + e.unit_normal[0], 0.0);
                    assert_eq!(nm[1] + e.unit_normal[1], 0.0);
                }
            }
        }
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = build_uniform_mesh(3).unwrap();
        for e in m.edges().iter().filter(|e| !e.is_interior()) {
            let a = m.vertices()[e.endpoints[0]];
            let b = m.vertices()[e.endpoints[1]];
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let probe = [mid[0] + 1e-3 * e.unit_normal[0], mid[1] + 1e-3 * e.unit_normal[1]];
            assert!(probe[0] < 0.0 || probe[0] > 1.0 || probe[1] < 0.0 || probe[1] > 1.0);
        }
    }

    #[test]
    fn nested_vertices_coincide_exactly() {
        let coarse = build_uniform_mesh(4).unwrap();
        let fine = build_uniform_mesh(8).unwrap();
        for (v, &[i, j]) in coarse.vertex_lattice().iter().enumerate() {
            let fv = (2 * j) * 9 + 2 * i;
            assert_eq!(coarse.vertices()[v], fine.vertices()[fv]);
        }
    }

    #[test]
    fn containing_triangle_identity_and_refinement() {
        let m = build_uniform_mesh(4).unwrap();
        for t in 0..m.n_triangles() {
            assert_eq!(containing_coarse_triangle(&m, &m, t).unwrap(), t);
        }
        let coarse = build_uniform_mesh(1).unwrap();
        let fine = build_uniform_mesh(2).unwrap();
        let map = coarse_triangle_map(&fine, &coarse).unwrap();
        for c in 0..coarse.n_triangles() {
            assert_eq!(map.iter().filter(|&&x| x == c).count(), 4);
        }
    }

    #[test]
    fn fine_triangles_lie_inside_their_coarse_parent() {
        let coarse = build_uniform_mesh(2).unwrap();
        let fine = build_uniform_mesh(8).unwrap();
        for t in 0..fine.n_triangles() {
            let c = containing_coarse_triangle(&fine, &coarse, t).unwrap();
            let [p0, p1, p2] = coarse.triangle_points(c);
            for q in fine.triangle_points(t).into_iter().chain([fine.barycenter(t)]) {
                // barycentric coordinates of q in the coarse triangle
                let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
                let l1 = ((q[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (q[1] - p0[1])) / det;
                let l2 = ((p1[0] - p0[0]) * (q[1] - p0[1]) - (q[0] - p0[0]) * (p1[1] - p0[1])) / det;
                let l0 = 1.0 - l1 - l2;
                assert!(l0 > -1e-14 && l1 > -1e-14 && l2 > -1e-14);
            }
        }
    }

    #[test]
    fn non_nested_meshes_are_rejected() {
        let coarse = build_uniform_mesh(3).unwrap();
        let fine = build_uniform_mesh(4).unwrap();
        assert!(matches!(
            containing_coarse_triangle(&fine, &coarse, 0),
            Err(Error::NotNested { .. })
        ));
    }

    #[test]
    fn text_dump_has_one_line_per_entity() {
        let m = build_uniform_mesh(2).unwrap();
        let text = m.to_text();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 9);
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.ends_with("interior")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.ends_with("boundary")).count(), 8);
    }
}
