//! Convergence study runner: per row, a full Newton solve on the fine grid
//! and a two-grid solve, their `H¹` errors, observed rates and timings.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use crate::analysis::{convergence_rate, error_norms};
use crate::error::{Error, Result};
use crate::felements::FeSpace;
use crate::geometry::build_uniform_mesh;
use crate::solvers::{grid_subdivisions, newton_solve, poisson_initial_guess, two_grid_solve, ProblemSpec, Schedule, SolverConfig};

/// How coarse and fine grids are paired.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPlan {
    Schedule(Schedule),
    /// Explicit `(N_H, N_h)` subdivision pairs.
    Custom(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub degree: usize,
    pub plan: GridPlan,
    pub n_min: u32,
    pub n_max: u32,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            plan: GridPlan::Schedule(Schedule::Table2),
            n_min: 2,
            n_max: 7,
            solver: SolverConfig::default(),
            out: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.degree) {
            return Err(Error::Config(format!("degree must be 2 or 3, got {}", self.degree)));
        }
        match &self.plan {
            GridPlan::Schedule(_) => {
                if self.n_min < 2 || self.n_min > self.n_max {
                    return Err(Error::Config(format!("need 2 <= n_min <= n_max, got {}..{}", self.n_min, self.n_max)));
                }
            }
            GridPlan::Custom(pairs) => {
                if pairs.is_empty() {
                    return Err(Error::Config("no grid pairs given".into()));
                }
                if let Some(&(c, f)) = pairs.iter().find(|(c, f)| *c == 0 || *f == 0 || f % c != 0) {
                    return Err(Error::NotNested { coarse: c, fine: f });
                }
            }
        }
        self.solver.validate()
    }

    /// `(N_H, N_h)` for every row.
    pub fn grids(&self) -> Result<Vec<(usize, usize)>> {
        match &self.plan {
            GridPlan::Schedule(mode) => (self.n_min..=self.n_max).map(|n| grid_subdivisions(*mode, n)).collect(),
            GridPlan::Custom(pairs) => Ok(pairs.clone()),
        }
    }
}

/// One table row. Rates are `None` on the first row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub coarse_h: f64,
    pub h: f64,
    pub err_newton_h1: f64,
    pub rate_newton: Option<f64>,
    pub err_two_grid_h1: f64,
    pub rate_two_grid: Option<f64>,
    pub time_two_grid: f64,
    pub time_newton: f64,
    pub newton_iterations: usize,
    pub coarse_iterations: usize,
    pub converged: bool,
    /// Set when a solve in this row failed; errors are then `NaN`.
    pub failure: Option<String>,
}

impl ConvergenceRecord {
    fn failed(coarse_h: f64, h: f64, msg: String) -> Self {
        Self {
            coarse_h,
            h,
            err_newton_h1: f64::NAN,
            rate_newton: None,
            err_two_grid_h1: f64::NAN,
            rate_two_grid: None,
            time_two_grid: f64::NAN,
            time_newton: f64::NAN,
            newton_iterations: 0,
            coarse_iterations: 0,
            converged: false,
            failure: Some(msg),
        }
    }

    pub fn ok(&self) -> bool {
        self.converged && self.failure.is_none()
    }
}

fn run_row(coarse_n: usize, fine_n: usize, degree: usize, problem: &ProblemSpec, cfg: &SolverConfig) -> Result<ConvergenceRecord> {
    let exact_u = problem.exact_u.as_ref().ok_or_else(|| Error::Config("problem has no exact solution".into()))?;
    let exact_du = problem.exact_du.as_ref().ok_or_else(|| Error::Config("problem has no exact gradient".into()))?;
    let fine = FeSpace::new(build_uniform_mesh(fine_n)?, degree)?;
    let coarse = FeSpace::new(build_uniform_mesh(coarse_n)?, degree)?;

    let start = Instant::now();
    let init = poisson_initial_guess(&fine, problem, cfg)?;
    let (u_newton, newton_stats) = newton_solve(&fine, problem, cfg, init)?;
    let time_newton = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (u_two_grid, _, coarse_stats) = two_grid_solve(&coarse, &fine, problem, cfg)?;
    let time_two_grid = start.elapsed().as_secs_f64();

    Ok(ConvergenceRecord {
        coarse_h: 1.0 / coarse_n as f64,
        h: 1.0 / fine_n as f64,
        err_newton_h1: error_norms(&u_newton, exact_u, exact_du)?.h1,
        rate_newton: None,
        err_two_grid_h1: error_norms(&u_two_grid, exact_u, exact_du)?.h1,
        rate_two_grid: None,
        time_two_grid,
        time_newton,
        newton_iterations: newton_stats.iterations,
        coarse_iterations: coarse_stats.iterations,
        converged: newton_stats.converged && coarse_stats.converged,
        failure: None,
    })
}

fn rate_between(a: &ConvergenceRecord, b: &ConvergenceRecord, err: fn(&ConvergenceRecord) -> f64) -> Option<f64> {
    convergence_rate(&[(a.h, err(a)), (b.h, err(b))]).ok().map(|r| r[0])
}

/// Runs every row sequentially on the manufactured problem. A failing
/// row is recorded and the run continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    run_experiment_with(config, &ProblemSpec::manufactured())
}

/// [`run_experiment`] for an arbitrary problem with a known solution.
pub fn run_experiment_with(config: &ExperimentConfig, problem: &ProblemSpec) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    for (coarse_n, fine_n) in config.grids()? {
        let mut rec = run_row(coarse_n, fine_n, config.degree, problem, &config.solver)
            .unwrap_or_else(|e| ConvergenceRecord::failed(1.0 / coarse_n as f64, 1.0 / fine_n as f64, e.to_string()));
        if let Some(prev) = records.last() {
            rec.rate_newton = rate_between(prev, &rec, |r| r.err_newton_h1);
            rec.rate_two_grid = rate_between(prev, &rec, |r| r.err_two_grid_h1);
        }
        records.push(rec);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "H,h,err_h1_newton,rate,err_h1_twogrid,rate,time_twogrid_s,time_newton_s";

/// `1/2^m` when `x` is such a power, else the plain decimal.
fn format_size(x: f64) -> String {
    let m = -x.log2();
    if (m - m.round()).abs() < 1e-12 && m >= 0.0 {
        format!("1/2^{}", m.round() as i64)
    } else {
        format!("{x}")
    }
}

fn format_err(e: f64) -> String {
    if e.is_finite() {
        format!("{e:.2e}")
    } else {
        "nan".into()
    }
}

fn format_rate(r: Option<f64>) -> String {
    match r {
        Some(r) if r.is_finite() => format!("{r:.2}"),
        _ => "-".into(),
    }
}

fn format_time(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.3}")
    } else {
        "nan".into()
    }
}

/// Renders the records as a table with the columns `H, h, Newton error,
/// rate, two-grid error, rate, two-grid time, Newton time`.
pub fn emit_table(records: &[ConvergenceRecord], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in records {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.coarse_h,
                    r.h,
                    format_err(r.err_newton_h1),
                    format_rate(r.rate_newton),
                    format_err(r.err_two_grid_h1),
                    format_rate(r.rate_two_grid),
                    format_time(r.time_two_grid),
                    format_time(r.time_newton)
                );
            }
        }
        TableFormat::Markdown => {
            out.push_str("| H | h | ‖u−u_h‖_H1 | rate | ‖u−u^h‖_H1 | rate | two-grid time (s) | Newton time (s) |\n");
            out.push_str("|---|---|---|---|---|---|---|---|\n");
            for r in records {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} | {} |",
                    format_size(r.coarse_h),
                    format_size(r.h),
                    format_err(r.err_newton_h1),
                    format_rate(r.rate_newton),
                    format_err(r.err_two_grid_h1),
                    format_rate(r.rate_two_grid),
                    format_time(r.time_two_grid),
                    format_time(r.time_newton)
                );
            }
        }
    }
    out
}
