use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mongeampere::cli::{emit_table, run_experiment, ExperimentConfig, GridPlan, TableFormat};
use mongeampere::solvers::{Schedule, SolverConfig};

/// Convergence study for det D²u = f on the unit square: full Newton
/// versus the two-grid scheme.
#[derive(Debug, Parser)]
#[command(name = "ma-bench", version)]
struct Args {
    /// Polynomial degree (2 or 3).
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// `table1` (H = 4h) or `table2` (H = 2h).
    #[arg(long, default_value = "table2")]
    schedule: Schedule,
    /// Explicit coarse:fine subdivision pairs, e.g. `4:16,8:32`; overrides the schedule.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 2)]
    n_min: u32,
    #[arg(long, default_value_t = 7)]
    n_max: u32,
    #[arg(long, default_value_t = 10)]
    max_newton_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    /// `markdown` or `csv`.
    #[arg(long, default_value = "markdown")]
    format: TableFormat,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected coarse:fine, got `{s}`"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let plan = if args.pairs.is_empty() {
        GridPlan::Schedule(args.schedule)
    } else {
        GridPlan::Custom(args.pairs)
    };
    let config = ExperimentConfig {
        degree: args.degree,
        plan,
        n_min: args.n_min,
        n_max: args.n_max,
        solver: SolverConfig {
            max_newton_iters: args.max_newton_iters,
            rel_tol: args.rel_tol,
            ..SolverConfig::default()
        },
        out: args.out,
        ..ExperimentConfig::default()
    };

    let records = match run_experiment(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let table = emit_table(&records, args.format);
    match &config.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &table) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{table}"),
    }
    let mut status = ExitCode::SUCCESS;
    for r in records.iter().filter(|r| !r.ok()) {
        eprintln!(
            "row h={} failed: {}",
            r.h,
            r.failure.as_deref().unwrap_or("Newton did not converge")
        );
        status = ExitCode::FAILURE;
    }
    status
}
