use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use shiftsplit::bench::{
    emit_structure, emit_table, run_experiment, AlphaMode, ExperimentConfig, Problem, StructureRow,
    TableFormat,
};
use shiftsplit::krylov::StoppingRule;
use shiftsplit::precond::{InnerPolicy, PrecondKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemKind {
    Stokes,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecondArg {
    None,
    Ss,
    Rss,
    Ppss,
    Aug,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InnerArg {
    Auto,
    Cg,
    Gmres10,
    Direct,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

/// Solve saddle point systems with shift-splitting preconditioned FGMRES.
#[derive(Debug, Parser)]
#[command(name = "ssbench", version)]
struct Args {
    #[arg(long, value_enum, default_value = "stokes")]
    problem: ProblemKind,
    /// Grid points per direction of the Stokes problem.
    #[arg(long = "s", default_value_t = 16)]
    s: usize,
    /// Viscosity.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Coupling factor in C = kB.
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    /// Assembled Matrix Market file for `--problem external`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value = "ss")]
    precond: PrecondArg,
    /// A positive number, or `est` for ‖BᵀC‖₂/‖A‖₂.
    #[arg(long, default_value = "est", conflicts_with = "alpha_sweep")]
    alpha: String,
    #[arg(long, value_delimiter = ',')]
    alpha_sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    maxit: usize,
    /// Inner solves reduce their residual by this factor.
    #[arg(long, default_value_t = 1e2)]
    inner_reduction: f64,
    #[arg(long, default_value_t = 100)]
    inner_maxit: usize,
    #[arg(long, value_enum, default_value = "auto")]
    inner: InnerArg,
    /// Write the preconditioned spectrum here (desk-scale systems only).
    #[arg(long)]
    spectrum_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
    /// Write the table to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print block sizes and nonzero counts instead of solving.
    #[arg(long)]
    structure: bool,
}

fn config(args: &Args) -> Result<ExperimentConfig> {
    let problem = match args.problem {
        ProblemKind::Stokes => Problem::Stokes {
            s: args.s,
            mu: args.mu,
            k: args.k,
        },
        ProblemKind::External => {
            let (Some(path), Some(n), Some(m)) = (args.matrix.clone(), args.n, args.m) else {
                bail!("--problem external needs --matrix, --n and --m");
            };
            Problem::External { path, n, m }
        }
    };
    let preconditioner = match args.precond {
        PrecondArg::None => None,
        PrecondArg::Ss => Some(PrecondKind::Ss),
        PrecondArg::Rss => Some(PrecondKind::Rss),
        PrecondArg::Ppss => Some(PrecondKind::Ppss),
        PrecondArg::Aug => Some(PrecondKind::Aug),
    };
    let alpha_mode = match (&args.alpha_sweep, args.alpha.as_str()) {
        (Some(list), _) => AlphaMode::Sweep(list.clone()),
        (None, "est") => AlphaMode::Est,
        (None, v) => AlphaMode::Fixed(
            v.parse()
                .with_context(|| format!("--alpha expects a number or `est`, got `{v}`"))?,
        ),
    };
    if args.inner_reduction <= 1.0 || args.inner_reduction.is_nan() {
        bail!(
            "--inner-reduction must exceed 1, got {}",
            args.inner_reduction
        );
    }
    let mut cfg = ExperimentConfig::new(problem, preconditioner, alpha_mode);
    cfg.rule = StoppingRule {
        rel_tol: args.tol,
        max_outer: args.maxit,
        inner_reduction: 1.0 / args.inner_reduction,
        max_inner: args.inner_maxit,
    };
    cfg.inner_policy = match args.inner {
        InnerArg::Auto => InnerPolicy::Auto,
        InnerArg::Cg => InnerPolicy::Cg,
        InnerArg::Gmres10 => InnerPolicy::Gmres10,
        InnerArg::Direct => InnerPolicy::Direct,
    };
    cfg.spectrum_out = args.spectrum_out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<()> {
    let cfg = config(args)?;
    let format = match args.format {
        FormatArg::Markdown => TableFormat::Markdown,
        FormatArg::Csv => TableFormat::Csv,
    };
    let text = if args.structure {
        let sys = cfg.problem.build()?;
        let label = match &cfg.problem {
            Problem::Stokes { s, .. } => format!("stokes s={s}"),
            Problem::External { path, .. } => path.display().to_string(),
        };
        emit_structure(&label, &StructureRow::of(&sys), format)
    } else {
        emit_table(&run_experiment(&cfg)?, format)
    };
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ssbench: {e:#}");
            ExitCode::FAILURE
        }
    }
}
