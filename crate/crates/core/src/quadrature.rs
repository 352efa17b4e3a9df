//! Gauss rules on the unit interval and collapsed (Duffy) Gauss product
//! rules on the reference triangle `conv{(0,0), (1,0), (0,1)}`.

use crate::error::{Error, Result};

/// Highest exactness degree [`triangle_rule`] and [`edge_rule`] will build.
pub const MAX_DEGREE: usize = 40;

#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Barycentric coordinates `(λ0, λ1, λ2)`; the reference point is `(λ1, λ2)`.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to 1/2, the reference triangle area.
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

#[derive(Debug, Clone)]
pub struct EdgeRule {
    /// Parameters in `[0, 1]`.
    pub points: Vec<f64>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                let jf = j as f64;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `min_degree`.
pub fn edge_rule(min_degree: usize) -> Result<EdgeRule> {
    if min_degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree {
            requested: min_degree,
            max: MAX_DEGREE,
        });
    }
    let n = (min_degree + 2) / 2;
    let (x, w) = gauss_legendre(n);
    Ok(EdgeRule {
        points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        exactness_degree: 2 * n - 1,
    })
}

/// Triangle rule exact for polynomials of total degree `min_degree`.
///
/// Built from the map `(s, t) ↦ (s, t (1 - s))` of the unit square; the
/// Jacobian `1 - s` raises the degree in `s` by one.
pub fn triangle_rule(min_degree: usize) -> Result<TriangleRule> {
    if min_degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree {
            requested: min_degree,
            max: MAX_DEGREE,
        });
    }
    let ns = (min_degree + 3) / 2;
    let nt = (min_degree + 2) / 2;
    let (xs, ws) = gauss_legendre(ns);
    let (xt, wt) = gauss_legendre(nt);
    let mut points = Vec::with_capacity(ns * nt);
    let mut weights = Vec::with_capacity(ns * nt);
    for (&a, &wa) in xs.iter().zip(&ws) {
        let s = 0.5 * (a + 1.0);
        for (&b, &wb) in xt.iter().zip(&wt) {
            let t = 0.5 * (b + 1.0);
            let x = s;
            let y = t * (1.0 - s);
            points.push([1.0 - x - y, x, y]);
            weights.push(0.25 * wa * wb * (1.0 - s));
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        exactness_degree: (2 * ns - 2).min(2 * nt - 1),
    })
}
