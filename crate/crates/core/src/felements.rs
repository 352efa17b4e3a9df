//! Lagrange `P_k` elements on the uniform mesh: reference basis, global dof
//! numbering, finite element functions, interpolation and prolongation.
//!
//! All Lagrange nodes of the uniform mesh lie on the refined lattice
//! `(X / (k n), Y / (k n))`, so the global index of a node is its lattice
//! position `Y (k n + 1) + X`. Shared nodes therefore get a single index.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{coarse_triangle_map, Mesh, Point};
use crate::tensor::{self, Mat2, Vec2};

/// Highest degree the reference element generator accepts.
pub const MAX_ELEMENT_DEGREE: usize = 8;

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub value: f64,
    pub gradient: Vec2,
    pub hessian: Mat2,
}

/// Reference basis values and derivatives at one point, one entry per basis
/// function. Derivatives are with respect to the reference coordinates
/// `(ξ, η) = (λ1, λ2)`.
#[derive(Debug, Clone, Default)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec2>,
    pub hessians: Vec<Mat2>,
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    degree: usize,
    /// Principal-lattice multi-indices `(a0, a1, a2)` with `a0 + a1 + a2 = k`.
    nodes: Vec<[usize; 3]>,
}

impl ReferenceElement {
    /// Nodes are ordered vertices, then edge nodes (edge `l` is opposite
    /// vertex `l`), then interior nodes.
    pub fn new(degree: usize) -> Result<Self> {
        if !(2..=MAX_ELEMENT_DEGREE).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let k = degree;
        let mut nodes = Vec::with_capacity((k + 1) * (k + 2) / 2);
        for v in 0..3 {
            let mut a = [0; 3];
            a[v] = k;
            nodes.push(a);
        }
        for l in 0..3 {
            let (p, q) = ((l + 1) % 3, (l + 2) % 3);
            for m in 1..k {
                let mut a = [0; 3];
                a[p] = k - m;
                a[q] = m;
                nodes.push(a);
            }
        }
        for a1 in 1..k {
            for a2 in 1..k - a1 {
                let a0 = k - a1 - a2;
                if a0 >= 1 {
                    nodes.push([a0, a1, a2]);
                }
            }
        }
        Ok(Self { degree, nodes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[usize; 3]] {
        &self.nodes
    }

    pub fn node_barycentric(&self, i: usize) -> [f64; 3] {
        let k = self.degree as f64;
        let a = self.nodes[i];
        [a[0] as f64 / k, a[1] as f64 / k, a[2] as f64 / k]
    }

    /// Evaluates all basis functions at barycentric point `bary`.
    pub fn reference_basis(&self, bary: [f64; 3]) -> BasisEval {
        let mut out = BasisEval::default();
        self.reference_basis_into(bary, &mut out);
        out
    }

    pub fn reference_basis_into(&self, bary: [f64; 3], out: &mut BasisEval) {
        let k = self.degree;
        let kf = k as f64;
        // univariate factors P_a(t) = Π_{m<a} (k t - m) / (m + 1) with two derivatives
        let mut fac = [[[0.0; 3]; MAX_ELEMENT_DEGREE + 1]; 3];
        for (i, &t) in bary.iter().enumerate() {
            let (mut v, mut d, mut s) = (1.0, 0.0, 0.0);
            fac[i][0] = [v, d, s];
            for m in 0..k {
                let c = 1.0 / (m as f64 + 1.0);
                let q = (kf * t - m as f64) * c;
                let dq = kf * c;
                s = s * q + 2.0 * d * dq;
                d = d * q + v * dq;
                v *= q;
                fac[i][m + 1] = [v, d, s];
            }
        }

        let n = self.nodes.len();
        out.values.clear();
        out.gradients.clear();
        out.hessians.clear();
        out.values.reserve(n);
        out.gradients.reserve(n);
        out.hessians.reserve(n);
        for a in &self.nodes {
            let f0 = fac[0][a[0]];
            let f1 = fac[1][a[1]];
            let f2 = fac[2][a[2]];
            let value = f0[0] * f1[0] * f2[0];
            // derivatives in barycentric variables
            let g = [f0[1] * f1[0] * f2[0], f0[0] * f1[1] * f2[0], f0[0] * f1[0] * f2[1]];
            let h00 = f0[2] * f1[0] * f2[0];
            let h11 = f0[0] * f1[2] * f2[0];
            let h22 = f0[0] * f1[0] * f2[2];
            let h01 = f0[1] * f1[1] * f2[0];
            let h02 = f0[1] * f1[0] * f2[1];
            let h12 = f0[0] * f1[1] * f2[1];
            // λ0 = 1 - ξ - η, λ1 = ξ, λ2 = η
            let gx = g[1] - g[0];
            let gy = g[2] - g[0];
            let hxx = h11 - 2.0 * h01 + h00;
            let hyy = h22 - 2.0 * h02 + h00;
            let hxy = h12 - h01 - h02 + h00;
            out.values.push(value);
            out.gradients.push([gx, gy]);
            out.hessians.push([[hxx, hxy], [hxy, hyy]]);
        }
    }
}

/// Affine map `x = p0 + J ξ` of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Point,
    pub jacobian: Mat2,
    /// `J⁻ᵀ`
    pub inv_transpose: Mat2,
    pub det: f64,
}

impl AffineMap {
    pub fn new(points: [Point; 3]) -> Self {
        let [p0, p1, p2] = points;
        let jacobian = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = tensor::det2(&jacobian);
        let inv_transpose = tensor::transpose(&tensor::inverse(&jacobian));
        Self {
            origin: p0,
            jacobian,
            inv_transpose,
            det,
        }
    }

    pub fn to_physical(&self, bary: [f64; 3]) -> Point {
        let (xi, eta) = (bary[1], bary[2]);
        [
            self.origin[0] + self.jacobian[0][0] * xi + self.jacobian[0][1] * eta,
            self.origin[1] + self.jacobian[1][0] * xi + self.jacobian[1][1] * eta,
        ]
    }

    pub fn to_barycentric(&self, x: Point) -> [f64; 3] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        // ξ = J⁻¹ d = (J⁻ᵀ)ᵀ d
        let xi = tensor::vec_mat(&d, &self.inv_transpose);
        [1.0 - xi[0] - xi[1], xi[0], xi[1]]
    }

    #[inline]
    pub fn push_gradient(&self, g: &Vec2) -> Vec2 {
        tensor::mat_vec(&self.inv_transpose, g)
    }

    /// `J⁻ᵀ H J⁻¹`
    #[inline]
    pub fn push_hessian(&self, h: &Mat2) -> Mat2 {
        let left = tensor::mat_mul(&self.inv_transpose, h);
        tensor::mat_mul(&left, &tensor::transpose(&self.inv_transpose))
    }
}

/// Continuous Lagrange space `V_h` on a uniform mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    element: ReferenceElement,
    maps: Vec<AffineMap>,
    dof_coords: Vec<Point>,
    cell_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
    interior_dofs: Vec<usize>,
    interior_index: Vec<Option<usize>>,
}

impl FeSpace {
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self> {
        let element = ReferenceElement::new(degree)?;
        let k = degree;
        let side = k * mesh.n_subdiv() + 1;
        let n_dofs = side * side;
        let scale = (k * mesh.n_subdiv()) as f64;

        let mut dof_coords = vec![[0.0; 2]; n_dofs];
        for (d, c) in dof_coords.iter_mut().enumerate() {
            *c = [(d % side) as f64 / scale, (d / side) as f64 / scale];
        }

        let lattice = mesh.vertex_lattice();
        let nb = element.n_basis();
        let mut cell_dofs = Vec::with_capacity(mesh.n_triangles() * nb);
        for tri in mesh.triangles() {
            let corners = [lattice[tri[0]], lattice[tri[1]], lattice[tri[2]]];
            for a in element.nodes() {
                let x: usize = (0..3).map(|v| a[v] * corners[v][0]).sum();
                let y: usize = (0..3).map(|v| a[v] * corners[v][1]).sum();
                cell_dofs.push(y * side + x);
            }
        }

        let last = side - 1;
        let mut boundary_dofs = Vec::new();
        let mut interior_dofs = Vec::new();
        let mut interior_index = vec![None; n_dofs];
        for (d, index) in interior_index.iter_mut().enumerate() {
            let (x, y) = (d % side, d / side);
            if x == 0 || y == 0 || x == last || y == last {
                boundary_dofs.push(d);
            } else {
                *index = Some(interior_dofs.len());
                interior_dofs.push(d);
            }
        }

        let maps = (0..mesh.n_triangles())
            .map(|t| AffineMap::new(mesh.triangle_points(t)))
            .collect();

        Ok(Self {
            mesh,
            element,
            maps,
            dof_coords,
            cell_dofs,
            boundary_dofs,
            interior_dofs,
            interior_index,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    /// Global dofs of triangle `t`, in reference node order.
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let nb = self.element.n_basis();
        &self.cell_dofs[t * nb..(t + 1) * nb]
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn n_interior(&self) -> usize {
        self.interior_dofs.len()
    }

    /// Position of dof `d` among the interior dofs, `None` on the boundary.
    pub fn interior_index(&self, d: usize) -> Option<usize> {
        self.interior_index[d]
    }

    pub fn is_boundary_dof(&self, d: usize) -> bool {
        self.interior_index[d].is_none()
    }

    pub fn affine_map(&self, t: usize) -> &AffineMap {
        &self.maps[t]
    }

    /// Restricts a full coefficient vector to the interior dofs.
    pub fn restrict_interior(&self, full: &[f64]) -> Vec<f64> {
        self.interior_dofs.iter().map(|&d| full[d]).collect()
    }

    /// Evaluates a coefficient vector on triangle `t` at `bary`.
    pub fn eval_coeffs(&self, coeffs: &[f64], t: usize, bary: [f64; 3], scratch: &mut BasisEval) -> PointEval {
        self.element.reference_basis_into(bary, scratch);
        let map = &self.maps[t];
        let mut value = 0.0;
        let mut g = [0.0; 2];
        let mut h = tensor::ZERO2;
        for (a, &d) in self.cell_dofs(t).iter().enumerate() {
            let c = coeffs[d];
            value += c * scratch.values[a];
            let gr = scratch.gradients[a];
            g[0] += c * gr[0];
            g[1] += c * gr[1];
            let hr = scratch.hessians[a];
            h[0][0] += c * hr[0][0];
            h[0][1] += c * hr[0][1];
            h[1][0] += c * hr[1][0];
            h[1][1] += c * hr[1][1];
        }
        PointEval {
            value,
            gradient: map.push_gradient(&g),
            hessian: map.push_hessian(&h),
        }
    }
}

/// A function in `V_h`: coefficients with respect to the nodal basis.
#[derive(Debug, Clone)]
pub struct FeFunction<'a> {
    space: &'a FeSpace,
    coeffs: Vec<f64>,
}

impl<'a> FeFunction<'a> {
    pub fn new(space: &'a FeSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: space.n_dofs(),
                got: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: &'a FeSpace) -> Self {
        Self {
            space,
            coeffs: vec![0.0; space.n_dofs()],
        }
    }

    pub fn space(&self) -> &'a FeSpace {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Value, gradient and broken Hessian on triangle `tri` at `bary`.
    pub fn evaluate(&self, tri: usize, bary: [f64; 3]) -> PointEval {
        let mut scratch = BasisEval::default();
        self.space.eval_coeffs(&self.coeffs, tri, bary, &mut scratch)
    }

    /// Evaluates at a physical point, using the triangle that contains it.
    pub fn evaluate_at(&self, p: Point) -> PointEval {
        let t = self.space.mesh().locate(p);
        let bary = self.space.affine_map(t).to_barycentric(p);
        self.evaluate(t, bary)
    }

    /// CSV `x,y,value` at the dof coordinates.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,value\n");
        for (p, c) in self.space.dof_coords().iter().zip(&self.coeffs) {
            let _ = writeln!(s, "{},{},{:e}", p[0], p[1], c);
        }
        s
    }
}

/// Anything that can be evaluated elementwise on the triangles of a mesh,
/// with a broken Hessian.
pub trait BrokenField {
    /// Subdivision count of the mesh whose triangle indices `eval_with` takes.
    fn mesh_subdiv(&self) -> usize;

    fn eval_with(&self, tri: usize, bary: [f64; 3], scratch: &mut BasisEval) -> PointEval;
}

impl BrokenField for FeFunction<'_> {
    fn mesh_subdiv(&self) -> usize {
        self.space.mesh().n_subdiv()
    }

    fn eval_with(&self, tri: usize, bary: [f64; 3], scratch: &mut BasisEval) -> PointEval {
        self.space.eval_coeffs(&self.coeffs, tri, bary, scratch)
    }
}

/// A coarse finite element function viewed on the triangles of a nested
/// fine mesh. Each fine triangle evaluates the coarse polynomial of the
/// coarse triangle containing it, so derivatives are exact.
#[derive(Debug, Clone)]
pub struct NestedField<'a> {
    coarse: &'a FeFunction<'a>,
    fine: &'a FeSpace,
    parent: Vec<usize>,
}

impl<'a> NestedField<'a> {
    pub fn new(coarse: &'a FeFunction<'a>, fine: &'a FeSpace) -> Result<Self> {
        let parent = coarse_triangle_map(fine.mesh(), coarse.space().mesh())?;
        Ok(Self { coarse, fine, parent })
    }

    pub fn parent(&self, fine_tri: usize) -> usize {
        self.parent[fine_tri]
    }
}

impl BrokenField for NestedField<'_> {
    fn mesh_subdiv(&self) -> usize {
        self.fine.mesh().n_subdiv()
    }

    fn eval_with(&self, tri: usize, bary: [f64; 3], scratch: &mut BasisEval) -> PointEval {
        let x = self.fine.affine_map(tri).to_physical(bary);
        let ct = self.parent[tri];
        let coarse_space = self.coarse.space();
        let cb = coarse_space.affine_map(ct).to_barycentric(x);
        coarse_space.eval_coeffs(self.coarse.coeffs(), ct, cb, scratch)
    }
}

/// Nodal interpolant `I_h g`.
pub fn interpolate<'a>(space: &'a FeSpace, g: impl Fn(Point) -> f64) -> FeFunction<'a> {
    FeFunction {
        space,
        coeffs: space.dof_coords().iter().map(|&p| g(p)).collect(),
    }
}

/// Transfers a coarse function to a nested fine space by pointwise
/// evaluation at the fine nodes.
pub fn prolongate<'f>(coarse_fun: &FeFunction<'_>, fine_space: &'f FeSpace) -> Result<FeFunction<'f>> {
    let coarse_space = coarse_fun.space();
    let map = coarse_triangle_map(fine_space.mesh(), coarse_space.mesh())?;
    let mut coeffs = vec![0.0; fine_space.n_dofs()];
    let mut done = vec![false; fine_space.n_dofs()];
    let mut scratch = BasisEval::default();
    for (t, &ct) in map.iter().enumerate() {
        let cmap = coarse_space.affine_map(ct);
        for &d in fine_space.cell_dofs(t) {
            if done[d] {
                continue;
            }
            let bary = cmap.to_barycentric(fine_space.dof_coords()[d]);
            coeffs[d] = coarse_space
                .eval_coeffs(coarse_fun.coeffs(), ct, bary, &mut scratch)
                .value;
            done[d] = true;
        }
    }
    FeFunction::new(fine_space, coeffs)
}
