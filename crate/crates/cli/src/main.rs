//! `mms`: scenario runner over finite metric measure spaces.
//!
//! One subcommand per task; every run writes `report.json` (plus task CSV
//! artifacts) into `--out` and exits 0 when all checks pass, 1 on input
//! errors, 2 when a check fails, 3 when a check is inconclusive.

mod inputs;
mod report;
mod scenario;
mod tolerances;

use clap::{Parser, Subcommand};
use scenario::Context;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mms",
    about = "Optimal transport, entropy convexity, Sobolev calculus, heat flow and the line-splitting pipeline on finite metric measure spaces",
    version
)]
struct Cli {
    /// Space: JSON file path, inline JSON document, or CSV distance matrix
    /// (with --weights).
    #[arg(long, global = true)]
    space: Option<String>,

    /// Weight column CSV when --space is a CSV distance matrix.
    #[arg(long, global = true)]
    weights: Option<String>,

    /// Output directory for report.json and CSV artifacts.
    #[arg(long, global = true, default_value = "mms-out")]
    out: PathBuf,

    /// Seed for randomized probes and sampling.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Dimension parameter N for curvature and comparison tasks.
    #[arg(long, global = true, default_value_t = 2.0)]
    dimension: f64,

    /// Comma-separated time grid (task-specific meaning).
    #[arg(long, global = true, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,

    /// Tolerance overrides, key=value (repeatable or comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    tol_overrides: Vec<String>,

    /// First measure (dirac:IDX | uniform | uniform:A..B | file path).
    #[arg(long, global = true)]
    mu: Option<String>,

    /// Second measure (same forms as --mu).
    #[arg(long, global = true)]
    nu: Option<String>,

    /// Line specification JSON ({"indices": [...], "times": [...]}); the
    /// canonical generator line is used when omitted.
    #[arg(long, global = true)]
    line: Option<String>,

    #[command(subcommand)]
    task: Task,
}

#[derive(Subcommand)]
enum Task {
    /// Report every violated space invariant.
    Validate,
    /// Exact quadratic optimal transport between --mu and --nu.
    W2,
    /// Entropy convexity along the displacement interpolation.
    Cd,
    /// Parallelogram (Hilbertianity) defect of the coordinate pair.
    Hilbert,
    /// Distance-Laplacian comparison against the dimension bound.
    Laplace,
    /// Heat flow conservation, composition, and kernel diagnostics.
    Heat,
    /// Gradient contraction along the heat flow.
    Be,
    /// Busemann field, translation flow, quotient, product identity.
    Split,
    /// The split stages plus the quotient curvature check one dimension
    /// down.
    FullPipeline,
}

impl Task {
    fn name(&self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::W2 => "w2",
            Task::Cd => "cd",
            Task::Hilbert => "hilbert",
            Task::Laplace => "laplace",
            Task::Heat => "heat",
            Task::Be => "be",
            Task::Split => "split",
            Task::FullPipeline => "full-pipeline",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<i32, String> {
    let overrides = tolerances::parse_overrides(&cli.tol_overrides)?;
    let tol = tolerances::Tolerances::with_overrides(&overrides)?;
    let space_arg = cli.space.as_deref().ok_or("missing --space")?;
    let loaded = inputs::load_space(space_arg, cli.weights.as_deref())?;
    if let Some(grid) = &cli.t_grid {
        if grid.is_empty() {
            return Err("empty --t-grid".into());
        }
    }

    let ctx = Context {
        loaded: &loaded,
        tol: &tol,
        out: &cli.out,
        seed: cli.seed,
        dimension: cli.dimension,
        t_grid: cli.t_grid.clone(),
        mu: cli.mu.clone(),
        nu: cli.nu.clone(),
        line: cli.line.clone(),
    };

    let mut report = match cli.task {
        Task::Validate => scenario::run_validate(&ctx)?,
        Task::W2 => scenario::run_w2(&ctx)?,
        Task::Cd => scenario::run_cd(&ctx)?,
        Task::Hilbert => scenario::run_hilbert(&ctx)?,
        Task::Laplace => scenario::run_laplace(&ctx)?,
        Task::Heat => scenario::run_heat(&ctx)?,
        Task::Be => scenario::run_be(&ctx)?,
        Task::Split => scenario::run_split(&ctx)?,
        Task::FullPipeline => scenario::run_full_pipeline(&ctx)?,
    };
    debug_assert_eq!(report.task, cli.task.name());

    let code = report.finalize_exit_code();
    report.write(&cli.out).map_err(|e| format!("write report: {e}"))?;
    for check in &report.checks {
        println!(
            "[{}] {:12} {} = {:.6e} (tol {:.3e})",
            report.task,
            format!("{:?}", check.verdict).to_lowercase(),
            check.name,
            check.value,
            check.tolerance
        );
    }
    println!("[{}] exit {code}; report at {}", report.task, cli.out.join("report.json").display());
    Ok(code)
}
