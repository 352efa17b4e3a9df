//! Poisson initial guess, Newton's method on one grid and the two-grid
//! scheme: Newton on a coarse grid followed by one linearized solve on the
//! fine grid with the Jacobian frozen at the coarse solution.

use std::fmt;
use std::time::{Duration, Instant};

use crate::assembly::{add_interior, apply_dirichlet, boundary_values, Assembler, DirichletSystem, JacobianTerms, ResidualTerms};
use crate::error::{Error, Result};
use crate::felements::{interpolate, prolongate, FeFunction, FeSpace, NestedField};
use crate::geometry::Point;
use crate::linsolve::solve;
use crate::tensor::Vec2;

type ScalarField = Box<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorField = Box<dyn Fn(Point) -> Vec2 + Send + Sync>;

/// Data of `det D²u = f` in the unit square with `u = g` on the boundary.
pub struct ProblemSpec {
    pub f: ScalarField,
    pub g: ScalarField,
    pub exact_u: Option<ScalarField>,
    pub exact_du: Option<VectorField>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("has_exact_u", &self.exact_u.is_some())
            .field("has_exact_du", &self.exact_du.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// `u = exp((x² + y²)/2)`, `f = (1 + x² + y²) exp(x² + y²)`.
    pub fn manufactured() -> Self {
        let u = |p: Point| (0.5 * (p[0] * p[0] + p[1] * p[1])).exp();
        Self {
            f: Box::new(|p| {
                let r2 = p[0] * p[0] + p[1] * p[1];
                (1.0 + r2) * r2.exp()
            }),
            g: Box::new(u),
            exact_u: Some(Box::new(u)),
            exact_du: Some(Box::new(move |p| {
                let e = u(p);
                [p[0] * e, p[1] * e]
            })),
        }
    }

    /// `u = (x² + y²)/2`, `f ≡ 1`, which lies in every `V_h` with `k ≥ 2`.
    pub fn quadratic() -> Self {
        let u = |p: Point| 0.5 * (p[0] * p[0] + p[1] * p[1]);
        Self {
            f: Box::new(|_| 1.0),
            g: Box::new(u),
            exact_u: Some(Box::new(u)),
            exact_du: Some(Box::new(|p| [p[0], p[1]])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_newton_iters: usize,
    /// Bound on `‖δ‖_∞ / ‖u⁰‖_∞`.
    pub rel_tol: f64,
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_newton_iters: 10,
            rel_tol: 1e-6,
            linear_tol: crate::linsolve::DEFAULT_LINEAR_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_newton_iters == 0 {
            return Err(Error::Config("max_newton_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖δᵐ‖_∞ / ‖u⁰‖_∞` per iteration.
    pub increment_history: Vec<f64>,
    pub assembly_time: Duration,
    pub solve_time: Duration,
    pub total_time: Duration,
    pub converged: bool,
}

impl SolveStats {
    pub const CSV_HEADER: &'static str = "grid,iterations,assembly_s,solve_s,total_s,converged";

    /// One CSV line; `grid` is the number of subdivisions per side.
    pub fn to_csv_row(&self, grid: usize) -> String {
        format!(
            "{grid},{},{:.6},{:.6},{:.6},{}",
            self.iterations,
            self.assembly_time.as_secs_f64(),
            self.solve_time.as_secs_f64(),
            self.total_time.as_secs_f64(),
            self.converged
        )
    }
}

fn check_positive_f(asm: &Assembler<'_>, f: &dyn Fn(Point) -> f64) -> Result<()> {
    let mut bad = None;
    asm.for_each_volume_point(|x| {
        let v = f(x);
        if bad.is_none() && (v.is_nan() || v <= 0.0) {
            bad = Some((v, x));
        }
    });
    match bad {
        Some((value, x)) => Err(Error::NonPositiveData { value, x: x[0], y: x[1] }),
        None => Ok(()),
    }
}

/// Discrete solution of `Δu₀ = 2√f` with `u₀ = g_h` on the boundary.
pub fn poisson_initial_guess<'a>(space: &'a FeSpace, problem: &ProblemSpec, config: &SolverConfig) -> Result<FeFunction<'a>> {
    let asm = Assembler::new(space)?;
    check_positive_f(&asm, &problem.f)?;
    let (stiffness, load) = asm.poisson(&|x| 2.0 * (problem.f)(x).sqrt());
    let g = boundary_values(space, &problem.g);
    let sys = apply_dirichlet(space, &stiffness, &load, &g)?;
    let x = solve(&sys.matrix, &sys.rhs, config.linear_tol)?;
    FeFunction::new(space, DirichletSystem::lift(space, &x, &g))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Plain Newton iteration `A'(uᵐ; δ, φ) = −A(uᵐ, φ)`, `uᵐ⁺¹ = uᵐ + δ`,
/// with `δ = 0` on the boundary.
///
/// Stops once `‖δ‖_∞ / ‖u⁰‖_∞ ≤ rel_tol`. Running out of iterations is
/// reported through `SolveStats::converged`.
pub fn newton_solve<'a>(space: &'a FeSpace, problem: &ProblemSpec, config: &SolverConfig, initial: FeFunction<'a>) -> Result<(FeFunction<'a>, SolveStats)> {
    config.validate()?;
    let start = Instant::now();
    let asm = Assembler::new(space)?;
    let mut u = initial;
    let scale = u.max_abs();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let zero_boundary = vec![0.0; space.n_dofs()];
    let mut stats = SolveStats::default();

    for _ in 0..config.max_newton_iters {
        let t0 = Instant::now();
        let r = asm.residual(&u, &problem.f, ResidualTerms::ALL)?;
        let jac = asm.jacobian(&u, JacobianTerms::ALL)?;
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let sys = apply_dirichlet(space, &jac, &rhs, &zero_boundary)?;
        stats.assembly_time += t0.elapsed();

        let t1 = Instant::now();
        let delta = solve(&sys.matrix, &sys.rhs, config.linear_tol)?;
        stats.solve_time += t1.elapsed();

        if let Some(i) = delta.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        add_interior(&mut u, &delta);
        stats.iterations += 1;
        let inc = max_abs(&delta) / scale;
        stats.increment_history.push(inc);
        if inc <= config.rel_tol {
            stats.converged = true;
            break;
        }
    }
    stats.total_time = start.elapsed();
    Ok((u, stats))
}

/// Newton on `coarse_space`, then one fine-grid solve of
/// `A'(u_H; δ, φ) = −A(u_H, φ)` with `u_H + δ = g_h` on the boundary.
///
/// Returns the fine solution, the fine-step statistics and the coarse
/// Newton statistics. The fine `total_time` covers the whole procedure.
pub fn two_grid_solve<'f>(
    coarse_space: &FeSpace,
    fine_space: &'f FeSpace,
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(FeFunction<'f>, SolveStats, SolveStats)> {
    config.validate()?;
    let start = Instant::now();
    let u0 = poisson_initial_guess(coarse_space, problem, config)?;
    let (u_coarse, coarse_stats) = newton_solve(coarse_space, problem, config, u0)?;

    let t0 = Instant::now();
    let field = NestedField::new(&u_coarse, fine_space)?;
    let asm = Assembler::new(fine_space)?;
    let r = asm.residual(&field, &problem.f, ResidualTerms::ALL)?;
    let jac = asm.jacobian(&field, JacobianTerms::ALL)?;
    let mut u = prolongate(&u_coarse, fine_space)?;
    // boundary values of δ carry g_h − u_H
    let g = boundary_values(fine_space, &problem.g);
    let correction: Vec<f64> = g.iter().zip(u.coeffs()).map(|(a, b)| a - b).collect();
    let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
    let sys = apply_dirichlet(fine_space, &jac, &rhs, &correction)?;
    let assembly_time = t0.elapsed();

    let t1 = Instant::now();
    let delta = solve(&sys.matrix, &sys.rhs, config.linear_tol)?;
    let solve_time = t1.elapsed();
    if let Some(i) = delta.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }

    let full = DirichletSystem::lift(fine_space, &delta, &correction);
    let scale = u.max_abs();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    for (c, d) in u.coeffs_mut().iter_mut().zip(&full) {
        *c += d;
    }
    for &d in fine_space.boundary_dofs() {
        u.coeffs_mut()[d] = g[d];
    }
    let stats = SolveStats {
        iterations: 1,
        increment_history: vec![max_abs(&full) / scale],
        assembly_time,
        solve_time,
        total_time: start.elapsed(),
        converged: coarse_stats.converged,
    };
    Ok((u, stats, coarse_stats))
}

/// Relation between the coarse size `H` and the fine size `h = 2⁻ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `H = h^λ` with `λ = 1 + 2 ln 2 / ln h`, i.e. `H = 4h`.
    Table1,
    /// `H = h^λ` with `λ = 1 + ln 2 / ln h`, i.e. `H = 2h`.
    Table2,
}

impl Schedule {
    /// Exponent `λ` with `H = h^λ`.
    pub fn lambda(self, h: f64) -> f64 {
        let c = match self {
            Schedule::Table1 => 2.0,
            Schedule::Table2 => 1.0,
        };
        1.0 + c * std::f64::consts::LN_2 / h.ln()
    }

    /// Coarse subdivisions per fine subdivision ratio `H/h`.
    pub fn ratio(self) -> usize {
        match self {
            Schedule::Table1 => 4,
            Schedule::Table2 => 2,
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Schedule::Table1),
            "table2" => Ok(Schedule::Table2),
            other => Err(Error::Config(format!("unknown schedule `{other}`"))),
        }
    }
}

/// `(H, h)` for `h = 2⁻ⁿ`.
pub fn grid_schedule(mode: Schedule, n: u32) -> Result<(f64, f64)> {
    let (coarse, fine) = grid_subdivisions(mode, n)?;
    Ok((1.0 / coarse as f64, 1.0 / fine as f64))
}

/// Subdivisions per side `(N_H, N_h)` for `h = 2⁻ⁿ`.
pub fn grid_subdivisions(mode: Schedule, n: u32) -> Result<(usize, usize)> {
    if !(2..=20).contains(&n) {
        return Err(Error::Config(format!("n must lie in 2..=20, got {n}")));
    }
    let fine = 1usize << n;
    Ok((fine / mode.ratio(), fine))
}

/// Interpolant of the problem's exact solution, if it has one.
pub fn exact_interpolant<'a>(space: &'a FeSpace, problem: &ProblemSpec) -> Option<FeFunction<'a>> {
    problem.exact_u.as_ref().map(|u| interpolate(space, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::error_norms;
    use crate::geometry::build_uniform_mesh;
    use crate::tensor::det2;

    fn space(n: usize, k: usize) -> FeSpace {
        FeSpace::new(build_uniform_mesh(n).unwrap(), k).unwrap()
    }

    #[test]
    fn schedules_match_lambda_formulas() {
        assert_eq!(grid_schedule(Schedule::Table1, 4).unwrap(), (0.25, 1.0 / 16.0));
        assert_eq!(grid_schedule(Schedule::Table2, 4).unwrap(), (0.125, 1.0 / 16.0));
        assert_eq!(grid_schedule(Schedule::Table1, 2).unwrap(), (1.0, 0.25));
        for n in 2..=10 {
            for mode in [Schedule::Table1, Schedule::Table2] {
                let (big, h) = grid_schedule(mode, n).unwrap();
                assert!((h.powf(mode.lambda(h)) - big).abs() < 1e-12 * big);
            }
        }
        assert!(grid_schedule(Schedule::Table2, 1).is_err());
        assert!("table3".parse::<Schedule>().is_err());
    }

    #[test]
    fn initial_guess_is_exact_for_quadratic_data() {
        let s = space(4, 2);
        let p = ProblemSpec::quadratic();
        let u0 = poisson_initial_guess(&s, &p, &SolverConfig::default()).unwrap();
        let exact = exact_interpolant(&s, &p).unwrap();
        for (a, b) in u0.coeffs().iter().zip(exact.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn initial_guess_with_zero_boundary_is_nonpositive() {
        let s = space(4, 2);
        let p = ProblemSpec {
            f: Box::new(|_| 1.0),
            g: Box::new(|_| 0.0),
            exact_u: None,
            exact_du: None,
        };
        let u0 = poisson_initial_guess(&s, &p, &SolverConfig::default()).unwrap();
        assert!(s.interior_dofs().iter().all(|&d| u0.coeffs()[d] <= 1e-12));
    }

    #[test]
    fn initial_guess_rejects_nonpositive_f() {
        let s = space(2, 2);
        let p = ProblemSpec {
            f: Box::new(|x| x[0] - 0.5),
            g: Box::new(|_| 0.0),
            exact_u: None,
            exact_du: None,
        };
        let err = poisson_initial_guess(&s, &p, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveData { .. }));
    }

    #[test]
    fn initial_guess_is_convex_for_manufactured_data() {
        let s = space(8, 2);
        let u0 = poisson_initial_guess(&s, &ProblemSpec::manufactured(), &SolverConfig::default()).unwrap();
        for t in 0..s.mesh().n_triangles() {
            let ev = u0.evaluate(t, [1.0 / 3.0; 3]);
            assert!(det2(&ev.hessian) > 0.0, "triangle {t}");
        }
    }

    #[test]
    fn newton_stops_immediately_at_the_exact_solution() {
        let s = space(4, 3);
        let p = ProblemSpec::quadratic();
        let init = exact_interpolant(&s, &p).unwrap();
        let (u, stats) = newton_solve(&s, &p, &SolverConfig::default(), init).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.iterations, 1);
        assert!(stats.increment_history[0] < 1e-12);
        let e = error_norms(&u, p.exact_u.as_ref().unwrap(), p.exact_du.as_ref().unwrap()).unwrap();
        assert!(e.h1 < 1e-10);
    }

    #[test]
    fn newton_converges_on_manufactured_problem() {
        let s = space(8, 2);
        let p = ProblemSpec::manufactured();
        let cfg = SolverConfig::default();
        let init = poisson_initial_guess(&s, &p, &cfg).unwrap();
        let g = boundary_values(&s, &p.g);
        let (u, stats) = newton_solve(&s, &p, &cfg, init).unwrap();
        assert!(stats.converged && stats.iterations <= 10);
        for &d in s.boundary_dofs() {
            assert_eq!(u.coeffs()[d], g[d]);
        }
        for t in 0..s.mesh().n_triangles() {
            assert!(det2(&u.evaluate(t, [1.0 / 3.0; 3]).hessian) > 0.0);
        }
        // fixed point
        let (v, again) = newton_solve(&s, &p, &cfg, u.clone()).unwrap();
        assert_eq!(again.iterations, 1);
        let diff = u.coeffs().iter().zip(v.coeffs()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= cfg.rel_tol * u.max_abs());
    }

    #[test]
    fn newton_reports_exhausted_iterations() {
        let s = space(4, 2);
        let p = ProblemSpec::manufactured();
        let cfg = SolverConfig {
            max_newton_iters: 1,
            ..SolverConfig::default()
        };
        let init = poisson_initial_guess(&s, &p, &cfg).unwrap();
        let (_, stats) = newton_solve(&s, &p, &cfg, init).unwrap();
        assert_eq!(stats.iterations, 1);
        assert!(!stats.converged);
        let bad = SolverConfig { max_newton_iters: 0, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn two_grid_on_identical_grids_returns_newton_solution() {
        let s = space(4, 2);
        let p = ProblemSpec::manufactured();
        let cfg = SolverConfig {
            rel_tol: 1e-13,
            ..SolverConfig::default()
        };
        let init = poisson_initial_guess(&s, &p, &cfg).unwrap();
        let (u, _) = newton_solve(&s, &p, &cfg, init).unwrap();
        let (w, stats, _) = two_grid_solve(&s, &s, &p, &cfg).unwrap();
        assert!(stats.increment_history[0] < 1e-11);
        for (a, b) in u.coeffs().iter().zip(w.coeffs()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn two_grid_keeps_fine_boundary_data() {
        let coarse = space(2, 2);
        let fine = space(4, 2);
        let p = ProblemSpec::manufactured();
        let (u, _, coarse_stats) = two_grid_solve(&coarse, &fine, &p, &SolverConfig::default()).unwrap();
        assert!(coarse_stats.converged);
        let g = boundary_values(&fine, &p.g);
        for &d in fine.boundary_dofs() {
            assert_eq!(u.coeffs()[d], g[d]);
        }
        let e = error_norms(&u, p.exact_u.as_ref().unwrap(), p.exact_du.as_ref().unwrap()).unwrap();
        assert!(e.h1 < 3e-2, "{}", e.h1);
    }

    #[test]
    fn two_grid_rejects_non_nested_grids() {
        let coarse = space(3, 2);
        let fine = space(4, 2);
        assert!(two_grid_solve(&coarse, &fine, &ProblemSpec::manufactured(), &SolverConfig::default()).is_err());
    }

    #[test]
    fn stats_serialize_to_csv() {
        let s = SolveStats {
            iterations: 3,
            converged: true,
            ..SolveStats::default()
        };
        let row = s.to_csv_row(16);
        assert_eq!(row.split(',').count(), SolveStats::CSV_HEADER.split(',').count());
        assert!(row.starts_with("16,3,") && row.ends_with(",true"));
    }
}
