//! Error norms against a known solution and observed convergence rates.

use crate::assembly::volume_quadrature_degree;
use crate::error::{Error, Result};
use crate::felements::{BasisEval, FeFunction};
use crate::geometry::Point;
use crate::quadrature::triangle_rule;
use crate::tensor::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub l2: f64,
    /// Full `H¹` norm, `(‖e‖² + ‖De‖²)^½`.
    pub h1: f64,
    /// `W^{1,∞}` norm sampled at quadrature points and element nodes.
    pub w1inf: f64,
}

/// Norms of `exact_u − fun`, computed elementwise with a rule two degrees
/// above the assembly rule.
pub fn error_norms(fun: &FeFunction<'_>, exact_u: &dyn Fn(Point) -> f64, exact_du: &dyn Fn(Point) -> Vec2) -> Result<ErrorReport> {
    let space = fun.space();
    let rule = triangle_rule(volume_quadrature_degree(space.degree()) + 2)?;
    let el = space.element();
    let nodes: Vec<[f64; 3]> = (0..el.n_basis()).map(|i| el.node_barycentric(i)).collect();
    let mut scratch = BasisEval::default();
    let (mut l2, mut semi, mut sup) = (0.0f64, 0.0f64, 0.0f64);

    let probe = |t: usize, bary: [f64; 3], scratch: &mut BasisEval| {
        let map = space.affine_map(t);
        let x = map.to_physical(bary);
        let ev = space.eval_coeffs(fun.coeffs(), t, bary, scratch);
        let du = exact_du(x);
        let e = exact_u(x) - ev.value;
        let de = [du[0] - ev.gradient[0], du[1] - ev.gradient[1]];
        (e, de)
    };

    for t in 0..space.mesh().n_triangles() {
        let det = space.affine_map(t).det;
        for (&bary, &w) in rule.points.iter().zip(&rule.weights) {
            let (e, de) = probe(t, bary, &mut scratch);
            l2 += e * e * w * det;
            semi += (de[0] * de[0] + de[1] * de[1]) * w * det;
            sup = sup.max(e.abs()).max(de[0].abs()).max(de[1].abs());
        }
        for &bary in &nodes {
            let (e, de) = probe(t, bary, &mut scratch);
            sup = sup.max(e.abs()).max(de[0].abs()).max(de[1].abs());
        }
    }
    if !(l2.is_finite() && semi.is_finite() && sup.is_finite()) {
        return Err(Error::NonFinite(0));
    }
    Ok(ErrorReport {
        l2: l2.sqrt(),
        h1: (l2 + semi).sqrt(),
        w1inf: sup,
    })
}

/// `log(e_{i−1}/e_i) / log(h_{i−1}/h_i)` for consecutive pairs `(h, e)`.
pub fn convergence_rate(pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    if let Some(&(h, e)) = pairs.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(Error::InvalidRates(format!("nonpositive or non-finite entry (h={h}, e={e})")));
    }
    pairs
        .windows(2)
        .map(|w| {
            let (h0, e0) = w[0];
            let (h1, e1) = w[1];
            if h0 == h1 {
                return Err(Error::InvalidRates(format!("repeated mesh size h={h0}")));
            }
            Ok((e0 / e1).ln() / (h0 / h1).ln())
        })
        .collect()
}
