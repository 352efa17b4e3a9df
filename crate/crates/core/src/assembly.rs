//! Global assembly of the C0 interior penalty Monge–Ampère forms.
//!
//! With `K⁺`/`K⁻` the two triangles of an interior edge `e` and `n` the
//! outward normal of `K⁺`:
//!
//! * residual: `A(v, φ) = Σ_K ∫_K (f − det D²v) φ + Σ_e ∫_e [[{{cof D²v}} Dv]] φ`
//! * Jacobian: `A'(w; v, φ) = Σ_K ∫_K (cof D²w) Dv · Dφ − Σ_e ∫_e [[cof D²w]] {{Dv}} φ
//!   + Σ_e ∫_e [[{{cof D²v}} Dw]] φ`
//! * remainder: `R(w; v, φ) = A(w + v, φ) − A(w, φ) − A'(w; v, φ)`, which
//!   depends on `v` only because the determinant is quadratic in 2D.
//!
//! Vector jumps are `[[q]] = q⁺·n⁺ + q⁻·n⁻` and matrix jumps are the row
//! vectors `[[E]] = n⁺ᵀE⁺ + n⁻ᵀE⁻`. Boundary edges carry no terms and test
//! functions range over the interior dofs.

use crate::error::{Error, Result};
use crate::felements::{BasisEval, BrokenField, FeFunction, FeSpace, PointEval};
use crate::geometry::{Edge, Point};
use crate::linsolve::{SparseMatrix, TripletBuilder};
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule, TriangleRule};
pub use crate::tensor::cof2;
use crate::tensor::{self, Mat2, Vec2};

/// Volume quadrature exactness used by the assemblers for degree `k`.
pub fn volume_quadrature_degree(k: usize) -> usize {
    (3 * k - 4).max(2 * k) + 2
}

/// Edge quadrature exactness used by the assemblers for degree `k`.
pub fn edge_quadrature_degree(k: usize) -> usize {
    3 * k - 4 + 2
}

/// Vector jump `q⁺·n⁺ + q⁻·n⁻` and average, with `n⁻ = −n⁺`.
pub fn vector_jump_avg(normal: &Vec2, plus: &Vec2, minus: &Vec2) -> (f64, Vec2) {
    let jump = tensor::dot(plus, normal) - tensor::dot(minus, normal);
    let avg = [0.5 * (plus[0] + minus[0]), 0.5 * (plus[1] + minus[1])];
    (jump, avg)
}

/// Matrix jump `n⁺ᵀE⁺ + n⁻ᵀE⁻` (a row vector) and average.
pub fn matrix_jump_avg(normal: &Vec2, plus: &Mat2, minus: &Mat2) -> (Vec2, Mat2) {
    let jump = tensor::vec_mat(normal, &tensor::sub(plus, minus));
    let avg = tensor::scale(&tensor::add(plus, minus), 0.5);
    (jump, avg)
}

/// Traces of a field from both sides of an interior edge at one quadrature
/// point.
#[derive(Debug, Clone, Copy)]
pub struct EdgeTrace {
    pub point: Point,
    /// Quadrature weight times edge length.
    pub weight: f64,
    /// Outward normal of `K⁺`.
    pub normal: Vec2,
    pub plus: PointEval,
    pub minus: PointEval,
}

impl EdgeTrace {
    /// Jump and average of the gradient.
    pub fn gradient_jump_avg(&self) -> (f64, Vec2) {
        vector_jump_avg(&self.normal, &self.plus.gradient, &self.minus.gradient)
    }

    /// Jump and average of the broken Hessian.
    pub fn hessian_jump_avg(&self) -> (Vec2, Mat2) {
        matrix_jump_avg(&self.normal, &self.plus.hessian, &self.minus.hessian)
    }

    /// Jump and average of the cofactor of the broken Hessian.
    pub fn cofactor_jump_avg(&self) -> (Vec2, Mat2) {
        matrix_jump_avg(&self.normal, &cof2(&self.plus.hessian), &cof2(&self.minus.hessian))
    }

    /// `[[{{cof D²v}} Dv]]`, the flux jump appearing in the residual.
    pub fn flux_jump(&self) -> f64 {
        let (_, avg) = self.cofactor_jump_avg();
        let dg = [
            self.plus.gradient[0] - self.minus.gradient[0],
            self.plus.gradient[1] - self.minus.gradient[1],
        ];
        tensor::dot(&tensor::mat_vec(&avg, &dg), &self.normal)
    }
}

/// Which pieces of the residual to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualTerms {
    pub volume: bool,
    pub edge: bool,
}

impl ResidualTerms {
    pub const ALL: Self = Self { volume: true, edge: true };
    pub const VOLUME: Self = Self { volume: true, edge: false };
    pub const EDGE: Self = Self { volume: false, edge: true };
}

/// Which pieces of the Jacobian to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JacobianTerms {
    /// `∫_K (cof D²w) Dv · Dφ`
    pub volume: bool,
    /// `−∫_e [[cof D²w]] {{Dv}} φ`
    pub cofactor_jump: bool,
    /// `∫_e [[{{cof D²v}} Dw]] φ`
    pub flux_jump: bool,
}

impl JacobianTerms {
    pub const ALL: Self = Self {
        volume: true,
        cofactor_jump: true,
        flux_jump: true,
    };
    pub const VOLUME: Self = Self {
        volume: true,
        cofactor_jump: false,
        flux_jump: false,
    };
    pub const COFACTOR_JUMP: Self = Self {
        volume: false,
        cofactor_jump: true,
        flux_jump: false,
    };
    pub const FLUX_JUMP: Self = Self {
        volume: false,
        cofactor_jump: false,
        flux_jump: true,
    };
}

/// Basis functions of both neighbours of an interior edge, pushed to
/// physical coordinates at one edge quadrature point.
struct EdgePoint {
    x: Point,
    weight: f64,
    bary_plus: [f64; 3],
    bary_minus: [f64; 3],
    plus: BasisEval,
    minus: BasisEval,
}

/// Quadrature rules and reference tables for one space.
pub struct Assembler<'s> {
    space: &'s FeSpace,
    volume: TriangleRule,
    edge: EdgeRule,
    tables: Vec<BasisEval>,
    /// For each local edge, the local nodes lying on it.
    edge_nodes: [Vec<usize>; 3],
}

impl<'s> Assembler<'s> {
    pub fn new(space: &'s FeSpace) -> Result<Self> {
        let k = space.degree();
        Self::with_degrees(space, volume_quadrature_degree(k), edge_quadrature_degree(k))
    }

    /// Uses explicit quadrature exactness degrees.
    pub fn with_degrees(space: &'s FeSpace, volume_degree: usize, edge_degree: usize) -> Result<Self> {
        let volume = triangle_rule(volume_degree)?;
        let edge = edge_rule(edge_degree)?;
        let el = space.element();
        let tables = volume.points.iter().map(|&p| el.reference_basis(p)).collect();
        let edge_nodes = std::array::from_fn(|l| {
            el.nodes()
                .iter()
                .enumerate()
                .filter(|(_, a)| a[l] == 0)
                .map(|(i, _)| i)
                .collect()
        });
        Ok(Self {
            space,
            volume,
            edge,
            tables,
            edge_nodes,
        })
    }

    pub fn space(&self) -> &'s FeSpace {
        self.space
    }

    fn check_field(&self, field: &(impl BrokenField + ?Sized)) -> Result<()> {
        let n = self.space.mesh().n_subdiv();
        if field.mesh_subdiv() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: field.mesh_subdiv(),
            });
        }
        Ok(())
    }

    fn interior_edges(&self) -> impl Iterator<Item = &'s Edge> {
        self.space.mesh().edges().iter().filter(|e| e.is_interior())
    }

    fn edge_point(&self, e: &Edge, t: f64, w: f64) -> EdgePoint {
        let mesh = self.space.mesh();
        let a = mesh.vertices()[e.endpoints[0]];
        let b = mesh.vertices()[e.endpoints[1]];
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let minus = e.minus.expect("interior edge");
        let bary_plus = self.space.affine_map(e.plus.triangle).to_barycentric(x);
        let bary_minus = self.space.affine_map(minus.triangle).to_barycentric(x);
        let el = self.space.element();
        EdgePoint {
            x,
            weight: w * e.length,
            bary_plus,
            bary_minus,
            plus: el.reference_basis(bary_plus),
            minus: el.reference_basis(bary_minus),
        }
    }

    /// Traces of `field` at the quadrature points of interior edge `edge`.
    pub fn edge_traces(&self, field: &(impl BrokenField + ?Sized), edge: usize) -> Result<Vec<EdgeTrace>> {
        self.check_field(field)?;
        let e = &self.space.mesh().edges()[edge];
        let minus = e.minus.ok_or(Error::BoundaryEdge(edge))?;
        let mut scratch = BasisEval::default();
        Ok(self
            .edge
            .points
            .iter()
            .zip(&self.edge.weights)
            .map(|(&t, &w)| {
                let ep = self.edge_point(e, t, w);
                EdgeTrace {
                    point: ep.x,
                    weight: ep.weight,
                    normal: e.unit_normal,
                    plus: field.eval_with(e.plus.triangle, ep.bary_plus, &mut scratch),
                    minus: field.eval_with(minus.triangle, ep.bary_minus, &mut scratch),
                }
            })
            .collect())
    }

    /// Residual `A(v, φ_i)` for every interior dof `i`.
    pub fn residual(&self, v: &(impl BrokenField + ?Sized), f: &dyn Fn(Point) -> f64, terms: ResidualTerms) -> Result<Vec<f64>> {
        self.check_field(v)?;
        let space = self.space;
        let mut full = vec![0.0; space.n_dofs()];
        let mut scratch = BasisEval::default();

        if terms.volume {
            for t in 0..space.mesh().n_triangles() {
                let map = space.affine_map(t);
                let dofs = space.cell_dofs(t);
                for ((&bary, &w), table) in self.volume.points.iter().zip(&self.volume.weights).zip(&self.tables) {
                    let ev = v.eval_with(t, bary, &mut scratch);
                    let x = map.to_physical(bary);
                    let c = (f(x) - tensor::det2(&ev.hessian)) * w * map.det;
                    for (a, &d) in dofs.iter().enumerate() {
                        full[d] += c * table.values[a];
                    }
                }
            }
        }

        if terms.edge {
            for e in self.interior_edges() {
                let minus = e.minus.unwrap();
                let dofs = space.cell_dofs(e.plus.triangle);
                for (&t, &w) in self.edge.points.iter().zip(&self.edge.weights) {
                    let ep = self.edge_point(e, t, w);
                    let trace = EdgeTrace {
                        point: ep.x,
                        weight: ep.weight,
                        normal: e.unit_normal,
                        plus: v.eval_with(e.plus.triangle, ep.bary_plus, &mut scratch),
                        minus: v.eval_with(minus.triangle, ep.bary_minus, &mut scratch),
                    };
                    let c = trace.flux_jump() * trace.weight;
                    for &a in &self.edge_nodes[e.plus.local_edge] {
                        full[dofs[a]] += c * ep.plus.values[a];
                    }
                }
            }
        }

        Ok(space.restrict_interior(&full))
    }

    /// Full `n_dofs × n_dofs` matrix `M[i][j] = A'(w; φ_j, φ_i)`.
    ///
    /// Rows of boundary dofs are assembled too; [`apply_dirichlet`] keeps
    /// only interior rows and folds boundary columns into the right-hand side.
    pub fn jacobian(&self, w: &(impl BrokenField + ?Sized), terms: JacobianTerms) -> Result<SparseMatrix> {
        self.check_field(w)?;
        let space = self.space;
        let n = space.n_dofs();
        let nb = space.element().n_basis();
        let mesh = space.mesh();
        let mut builder = TripletBuilder::with_capacity(n, n, mesh.n_triangles() * nb * nb * 3);
        let mut scratch = BasisEval::default();

        if terms.volume {
            let mut grads = vec![[0.0; 2]; nb];
            let mut local = vec![0.0; nb * nb];
            for t in 0..mesh.n_triangles() {
                let map = space.affine_map(t);
                let dofs = space.cell_dofs(t);
                local.iter_mut().for_each(|x| *x = 0.0);
                for ((&bary, &qw), table) in self.volume.points.iter().zip(&self.volume.weights).zip(&self.tables) {
                    let ev = w.eval_with(t, bary, &mut scratch);
                    let c = cof2(&ev.hessian);
                    let jw = qw * map.det;
                    for (g, gr) in grads.iter_mut().zip(&table.gradients) {
                        *g = map.push_gradient(gr);
                    }
                    for j in 0..nb {
                        let cg = tensor::mat_vec(&c, &grads[j]);
                        for i in 0..nb {
                            local[i * nb + j] += tensor::dot(&cg, &grads[i]) * jw;
                        }
                    }
                }
                for i in 0..nb {
                    for j in 0..nb {
                        builder.push(dofs[i], dofs[j], local[i * nb + j]);
                    }
                }
            }
        }

        if terms.cofactor_jump || terms.flux_jump {
            // trial functions of the edge patch: (dof, local in K⁺, local in K⁻)
            let mut patch: Vec<(usize, Option<usize>, Option<usize>)> = Vec::with_capacity(2 * nb);
            let mut values: Vec<f64> = Vec::with_capacity(2 * nb);
            for e in self.interior_edges() {
                let minus = e.minus.unwrap();
                let (tp, tm) = (e.plus.triangle, minus.triangle);
                let (mp, mm) = (space.affine_map(tp), space.affine_map(tm));
                let dofs_p = space.cell_dofs(tp);
                let dofs_m = space.cell_dofs(tm);
                patch.clear();
                patch.extend(dofs_p.iter().enumerate().map(|(a, &d)| (d, Some(a), None)));
                for (a, &d) in dofs_m.iter().enumerate() {
                    match patch.iter_mut().find(|p| p.0 == d) {
                        Some(p) => p.2 = Some(a),
                        None => patch.push((d, None, Some(a))),
                    }
                }
                let n_patch = patch.len();
                values.clear();
                values.resize(self.edge.len() * n_patch, 0.0);
                let normal = e.unit_normal;
                let mut test_values = Vec::with_capacity(self.edge.len());

                for (q, (&t, &qw)) in self.edge.points.iter().zip(&self.edge.weights).enumerate() {
                    let ep = self.edge_point(e, t, qw);
                    let wp = w.eval_with(tp, ep.bary_plus, &mut scratch);
                    let wm = w.eval_with(tm, ep.bary_minus, &mut scratch);
                    let (cof_jump, _) = matrix_jump_avg(&normal, &cof2(&wp.hessian), &cof2(&wm.hessian));
                    let dw = [wp.gradient[0] - wm.gradient[0], wp.gradient[1] - wm.gradient[1]];
                    for (s, &(_, ap, am)) in patch.iter().enumerate() {
                        let (gp, hp) = ap.map_or(([0.0; 2], tensor::ZERO2), |a| {
                            (mp.push_gradient(&ep.plus.gradients[a]), mp.push_hessian(&ep.plus.hessians[a]))
                        });
                        let (gm, hm) = am.map_or(([0.0; 2], tensor::ZERO2), |a| {
                            (mm.push_gradient(&ep.minus.gradients[a]), mm.push_hessian(&ep.minus.hessians[a]))
                        });
                        let mut val = 0.0;
                        if terms.cofactor_jump {
                            let avg_grad = [0.5 * (gp[0] + gm[0]), 0.5 * (gp[1] + gm[1])];
                            val -= tensor::dot(&cof_jump, &avg_grad);
                        }
                        if terms.flux_jump {
                            let avg_cof = tensor::scale(&tensor::add(&cof2(&hp), &cof2(&hm)), 0.5);
                            val += tensor::dot(&tensor::mat_vec(&avg_cof, &dw), &normal);
                        }
                        values[q * n_patch + s] = val * ep.weight;
                    }
                    test_values.push(ep.plus);
                }

                for &a in &self.edge_nodes[e.plus.local_edge] {
                    let row = dofs_p[a];
                    for (s, &(col, _, _)) in patch.iter().enumerate() {
                        let mut sum = 0.0;
                        for (q, tv) in test_values.iter().enumerate() {
                            sum += values[q * n_patch + s] * tv.values[a];
                        }
                        builder.push(row, col, sum);
                    }
                }
            }
        }

        Ok(builder.build())
    }

    /// `R(·; v, φ_i)` for every interior dof `i`, via
    /// `½ Σ_K ∫ (cof D²v) Dv · Dφ − ½ Σ_e ∫ [[cof D²v]] {{Dv}} φ + ½ Σ_e ∫ [[{{cof D²v}} Dv]] φ`.
    pub fn remainder(&self, v: &(impl BrokenField + ?Sized)) -> Result<Vec<f64>> {
        self.check_field(v)?;
        let space = self.space;
        let mut full = vec![0.0; space.n_dofs()];
        let mut scratch = BasisEval::default();

        for t in 0..space.mesh().n_triangles() {
            let map = space.affine_map(t);
            let dofs = space.cell_dofs(t);
            for ((&bary, &w), table) in self.volume.points.iter().zip(&self.volume.weights).zip(&self.tables) {
                let ev = v.eval_with(t, bary, &mut scratch);
                let flux = tensor::mat_vec(&cof2(&ev.hessian), &ev.gradient);
                let jw = 0.5 * w * map.det;
                for (a, &d) in dofs.iter().enumerate() {
                    full[d] += tensor::dot(&flux, &map.push_gradient(&table.gradients[a])) * jw;
                }
            }
        }

        for e in self.interior_edges() {
            let minus = e.minus.unwrap();
            let dofs = space.cell_dofs(e.plus.triangle);
            for (&t, &w) in self.edge.points.iter().zip(&self.edge.weights) {
                let ep = self.edge_point(e, t, w);
                let trace = EdgeTrace {
                    point: ep.x,
                    weight: ep.weight,
                    normal: e.unit_normal,
                    plus: v.eval_with(e.plus.triangle, ep.bary_plus, &mut scratch),
                    minus: v.eval_with(minus.triangle, ep.bary_minus, &mut scratch),
                };
                let (cof_jump, _) = trace.cofactor_jump_avg();
                let (_, avg_grad) = trace.gradient_jump_avg();
                let integrand = -0.5 * tensor::dot(&cof_jump, &avg_grad) + 0.5 * trace.flux_jump();
                let c = integrand * trace.weight;
                for &a in &self.edge_nodes[e.plus.local_edge] {
                    full[dofs[a]] += c * ep.plus.values[a];
                }
            }
        }

        Ok(space.restrict_interior(&full))
    }

    /// Stiffness matrix `∫ Dφ_j · Dφ_i` over all dofs and the load
    /// `−∫ rhs φ_i` over interior dofs, the weak form of `Δu = rhs`.
    pub fn poisson(&self, rhs: &dyn Fn(Point) -> f64) -> (SparseMatrix, Vec<f64>) {
        let space = self.space;
        let n = space.n_dofs();
        let nb = space.element().n_basis();
        let mesh = space.mesh();
        let mut builder = TripletBuilder::with_capacity(n, n, mesh.n_triangles() * nb * nb);
        let mut load = vec![0.0; n];
        let mut grads = vec![[0.0; 2]; nb];
        let mut local = vec![0.0; nb * nb];
        for t in 0..mesh.n_triangles() {
            let map = space.affine_map(t);
            let dofs = space.cell_dofs(t);
            local.iter_mut().for_each(|x| *x = 0.0);
            for ((&bary, &qw), table) in self.volume.points.iter().zip(&self.volume.weights).zip(&self.tables) {
                let jw = qw * map.det;
                for (g, gr) in grads.iter_mut().zip(&table.gradients) {
                    *g = map.push_gradient(gr);
                }
                let r = rhs(map.to_physical(bary));
                for i in 0..nb {
                    load[dofs[i]] -= r * table.values[i] * jw;
                    for j in 0..nb {
                        local[i * nb + j] += tensor::dot(&grads[j], &grads[i]) * jw;
                    }
                }
            }
            for i in 0..nb {
                for j in 0..nb {
                    builder.push(dofs[i], dofs[j], local[i * nb + j]);
                }
            }
        }
        (builder.build(), space.restrict_interior(&load))
    }

    /// Calls `visit` with the physical point of every volume quadrature point.
    pub fn for_each_volume_point(&self, mut visit: impl FnMut(Point)) {
        for t in 0..self.space.mesh().n_triangles() {
            let map = self.space.affine_map(t);
            for &bary in &self.volume.points {
                visit(map.to_physical(bary));
            }
        }
    }
}

/// `A(v, φ_i)` over interior dofs.
pub fn assemble_residual(space: &FeSpace, v: &(impl BrokenField + ?Sized), f: &dyn Fn(Point) -> f64) -> Result<Vec<f64>> {
    Assembler::new(space)?.residual(v, f, ResidualTerms::ALL)
}

/// `A'(w; φ_j, φ_i)` over all dofs; see [`Assembler::jacobian`].
pub fn assemble_jacobian(space: &FeSpace, w: &(impl BrokenField + ?Sized)) -> Result<SparseMatrix> {
    Assembler::new(space)?.jacobian(w, JacobianTerms::ALL)
}

/// `R(w; v, φ_i)` over interior dofs. The remainder does not involve `w`.
pub fn taylor_remainder(space: &FeSpace, v: &(impl BrokenField + ?Sized)) -> Result<Vec<f64>> {
    Assembler::new(space)?.remainder(v)
}

/// Weak Laplacian for `Δu = rhs`; see [`Assembler::poisson`].
pub fn assemble_poisson(space: &FeSpace, rhs: &dyn Fn(Point) -> f64) -> Result<(SparseMatrix, Vec<f64>)> {
    Ok(Assembler::new(space)?.poisson(rhs))
}

/// Coefficient vector that is `g` at boundary dofs and zero elsewhere.
pub fn boundary_values(space: &FeSpace, g: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let mut v = vec![0.0; space.n_dofs()];
    for &d in space.boundary_dofs() {
        v[d] = g(space.dof_coords()[d]);
    }
    v
}

/// Interior system left after eliminating Dirichlet dofs.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl DirichletSystem {
    /// Full coefficient vector: `interior` at interior dofs, the boundary
    /// entries of `boundary` elsewhere.
    pub fn lift(space: &FeSpace, interior: &[f64], boundary: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; space.n_dofs()];
        for &d in space.boundary_dofs() {
            full[d] = boundary[d];
        }
        for (&d, &x) in space.interior_dofs().iter().zip(interior) {
            full[d] = x;
        }
        full
    }
}

/// Eliminates boundary dofs from a full system.
///
/// `matrix` is `n_dofs × n_dofs`, `rhs` is indexed by interior dofs and
/// only the boundary entries of `boundary` are read. Returns
/// `M_II x_I = rhs − M_IB g_B`.
pub fn apply_dirichlet(space: &FeSpace, matrix: &SparseMatrix, rhs: &[f64], boundary: &[f64]) -> Result<DirichletSystem> {
    let n = space.n_dofs();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: matrix.nrows(),
        });
    }
    if rhs.len() != space.n_interior() {
        return Err(Error::DimensionMismatch {
            expected: space.n_interior(),
            got: rhs.len(),
        });
    }
    if boundary.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: boundary.len(),
        });
    }
    let interior = space.interior_dofs();
    let mut reduced_rhs = rhs.to_vec();
    for (r, &d) in reduced_rhs.iter_mut().zip(interior) {
        for (c, v) in matrix.row(d) {
            if space.is_boundary_dof(c) {
                *r -= v * boundary[c];
            }
        }
    }
    Ok(DirichletSystem {
        matrix: matrix.submatrix(interior, interior),
        rhs: reduced_rhs,
    })
}

/// Scatters an interior increment into a function's coefficients.
pub fn add_interior(fun: &mut FeFunction<'_>, delta: &[f64]) {
    let space = fun.space();
    let coeffs = fun.coeffs_mut();
    for (&d, &x) in space.interior_dofs().iter().zip(delta) {
        coeffs[d] += x;
    }
}
