//! Experiment harness: build a system, solve `𝒜x = 𝒜·1` with (F)GMRES and
//! report iteration counts, timings and residuals as markdown or CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dense::NORM_TOL_DEFAULT;
use crate::error::{Error, Result};
use crate::krylov::{fgmres, gmres, SolveReport, StoppingRule};
use crate::matrix_market::read_matrix_market;
use crate::operator::{vec_ops, LinearOperator};
use crate::precond::{InnerPolicy, PrecondKind, PrecondSpec, SaddlePreconditioner};
use crate::saddle::{build_stokes, split_external, SaddleSystem};
use crate::spectrum::{export_spectrum_csv, preconditioned_spectrum, unpreconditioned_spectrum};

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Stokes {
        s: usize,
        mu: f64,
        k: f64,
    },
    /// Assembled `(n+m)×(n+m)` Matrix Market file.
    External {
        path: PathBuf,
        n: usize,
        m: usize,
    },
}

impl Problem {
    pub fn build(&self) -> Result<SaddleSystem> {
        match self {
            Self::Stokes { s, mu, k } => build_stokes(*s, *mu, *k),
            Self::External { path, n, m } => split_external(&read_matrix_market(path)?, *n, *m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaMode {
    Fixed(f64),
    /// `α = ‖BᵀC‖₂ / ‖A‖₂`.
    Est,
    Sweep(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Markdown,
    Csv,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// `None` runs plain unrestarted GMRES.
    pub preconditioner: Option<PrecondKind>,
    pub inner_policy: InnerPolicy,
    pub alpha_mode: AlphaMode,
    pub rule: StoppingRule,
    /// Where to write the spectrum of each row's preconditioned matrix.
    pub spectrum_out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(
        problem: Problem,
        preconditioner: Option<PrecondKind>,
        alpha_mode: AlphaMode,
    ) -> Self {
        Self {
            problem,
            preconditioner,
            inner_policy: InnerPolicy::Auto,
            alpha_mode,
            rule: StoppingRule::default(),
            spectrum_out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        let bad_alpha = |a: f64| !(a > 0.0 && a.is_finite());
        match &self.alpha_mode {
            AlphaMode::Sweep(list) if list.is_empty() => {
                return Err(Error::InvalidParameter("alpha sweep list is empty".into()))
            }
            AlphaMode::Sweep(list) if list.iter().any(|&a| bad_alpha(a)) => {
                return Err(Error::InvalidParameter(format!(
                    "alpha values must be positive, got {list:?}"
                )))
            }
            AlphaMode::Fixed(a) if bad_alpha(*a) => {
                return Err(Error::InvalidParameter(format!(
                    "alpha must be positive, got {a}"
                )))
            }
            _ => {}
        }
        match &self.problem {
            Problem::Stokes { s, mu, k }
                if *s == 0 || *mu <= 0.0 || *k <= 0.0 || mu.is_nan() || k.is_nan() =>
            {
                Err(Error::InvalidParameter(format!(
                    "invalid Stokes parameters s={s}, mu={mu}, k={k}"
                )))
            }
            Problem::External { n, m, .. } if *n == 0 || *m == 0 => Err(Error::InvalidDimension(
                format!("external problem needs n, m > 0 (n = {n}, m = {m})"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    /// `None` for the unpreconditioned run.
    pub alpha_used: Option<f64>,
    pub iters: usize,
    /// Wall-clock seconds of the solve alone.
    pub cpu_seconds: f64,
    /// `‖f − 𝒜x‖₂/‖f‖₂`, recomputed from the returned solution.
    pub final_rk: f64,
    /// The solver's own last recorded residual.
    pub solver_rk: f64,
    pub converged: bool,
    /// Minimal `cpu_seconds` within a sweep.
    pub fastest: bool,
}

fn solve_row(
    sys: &SaddleSystem,
    f: &[f64],
    kind: Option<PrecondKind>,
    alpha: Option<f64>,
    cfg: &ExperimentConfig,
) -> Result<TableRow> {
    let report: SolveReport = match (kind, alpha) {
        (Some(kind), Some(alpha)) => {
            let spec = PrecondSpec::new(kind, alpha, cfg.inner_policy, cfg.rule)?;
            let mut p = SaddlePreconditioner::new(sys, spec)?;
            fgmres(sys, f, &mut p, &cfg.rule, None)?
        }
        _ => gmres(sys, f, cfg.rule.max_outer, &cfg.rule, None)?,
    };
    let r = vec_ops::sub(f, &sys.apply_alloc(&report.final_solution));
    Ok(TableRow {
        label: kind.map_or("none", |k| k.label()).to_string(),
        alpha_used: alpha,
        iters: report.iterations,
        cpu_seconds: report.wall_seconds,
        final_rk: vec_ops::norm2(&r) / vec_ops::norm2(f),
        solver_rk: report.final_residual(),
        converged: report.converged,
        fastest: false,
    })
}

/// Inserts `_{index}` before the extension.
fn indexed_path(path: &Path, index: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("spectrum");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{index}.{ext}"),
        None => format!("{stem}_{index}"),
    };
    path.with_file_name(name)
}

fn write_spectra(sys: &SaddleSystem, cfg: &ExperimentConfig, rows: &[TableRow]) -> Result<()> {
    let Some(out) = &cfg.spectrum_out else {
        return Ok(());
    };
    for (i, row) in rows.iter().enumerate() {
        let report = match (cfg.preconditioner, row.alpha_used) {
            (Some(kind), Some(alpha)) => preconditioned_spectrum(
                sys,
                &PrecondSpec::new(kind, alpha, InnerPolicy::Direct, cfg.rule)?,
            )?,
            _ => unpreconditioned_spectrum(sys)?,
        };
        let path = if rows.len() == 1 {
            out.clone()
        } else {
            indexed_path(out, i)
        };
        export_spectrum_csv(&report, path)?;
    }
    Ok(())
}

/// One row per α value (a single row for fixed, est or unpreconditioned
/// runs). Sweeps flag their fastest row.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    cfg.validate()?;
    let sys = cfg.problem.build()?;
    run_on(&sys, cfg)
}

/// [`run_experiment`] on an already built system.
pub fn run_on(sys: &SaddleSystem, cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    cfg.validate()?;
    let f = sys.rhs_all_ones();
    let alphas: Vec<Option<f64>> = match (&cfg.preconditioner, &cfg.alpha_mode) {
        (None, _) => vec![None],
        (Some(_), AlphaMode::Fixed(a)) => vec![Some(*a)],
        (Some(_), AlphaMode::Est) => vec![Some(sys.alpha_est(NORM_TOL_DEFAULT).alpha)],
        (Some(_), AlphaMode::Sweep(list)) => list.iter().copied().map(Some).collect(),
    };
    let mut rows = alphas
        .into_iter()
        .map(|alpha| solve_row(sys, &f, cfg.preconditioner, alpha, cfg))
        .collect::<Result<Vec<_>>>()?;
    if matches!(cfg.alpha_mode, AlphaMode::Sweep(_)) {
        flag_fastest(&mut rows);
    }
    write_spectra(sys, cfg, &rows)?;
    Ok(rows)
}

/// Runs a sweep; the config must be in sweep mode.
pub fn sweep_alpha(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    if !matches!(cfg.alpha_mode, AlphaMode::Sweep(_)) {
        return Err(Error::InvalidParameter(
            "sweep_alpha needs a sweep list".into(),
        ));
    }
    run_experiment(cfg)
}

fn flag_fastest(rows: &mut [TableRow]) {
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cpu_seconds.total_cmp(&b.1.cpu_seconds))
        .map(|(i, _)| i);
    for (i, row) in rows.iter_mut().enumerate() {
        row.fastest = Some(i) == best;
    }
}

/// `8.4e-8` style.
pub fn format_rk(v: f64) -> String {
    format!("{v:.1e}")
}

/// Up to four decimals, trailing zeros dropped.
fn format_alpha(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

const COLUMNS: [&str; 6] = ["label", "alpha", "iters", "cpu", "Rk", "converged"];

/// Renders rows with a fixed column order. Non-converged rows show `†` in
/// markdown and an empty `iters` field in CSV.
pub fn emit_table(rows: &[TableRow], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            writeln!(out, "| {} |", COLUMNS.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(COLUMNS.len())).unwrap();
            for row in rows {
                let iters = if row.converged {
                    row.iters.to_string()
                } else {
                    "†".to_string()
                };
                let cpu = format!("{:.3}", row.cpu_seconds);
                let cpu = if row.fastest { format!("_{cpu}_") } else { cpu };
                writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} |",
                    row.label,
                    row.alpha_used.map_or("-".to_string(), format_alpha),
                    iters,
                    cpu,
                    format_rk(row.final_rk),
                    row.converged
                )
                .unwrap();
            }
        }
        TableFormat::Csv => {
            writeln!(out, "{}", COLUMNS.join(",")).unwrap();
            for row in rows {
                writeln!(
                    out,
                    "{},{},{},{:.6},{},{}",
                    row.label,
                    row.alpha_used.map_or(String::new(), |a| a.to_string()),
                    if row.converged {
                        row.iters.to_string()
                    } else {
                        String::new()
                    },
                    row.cpu_seconds,
                    format_rk(row.final_rk),
                    row.converged
                )
                .unwrap();
            }
        }
    }
    out
}

/// Block sizes and nonzero counts of a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureRow {
    pub n: usize,
    pub m: usize,
    pub nnz_a: usize,
    pub nnz_b: usize,
    pub nnz_c: usize,
}

impl StructureRow {
    pub fn of(sys: &SaddleSystem) -> Self {
        Self {
            n: sys.n(),
            m: sys.m(),
            nnz_a: sys.a().nnz(),
            nnz_b: sys.b().nnz(),
            nnz_c: sys.c().nnz(),
        }
    }
}

pub fn emit_structure(label: &str, row: &StructureRow, format: TableFormat) -> String {
    let StructureRow {
        n,
        m,
        nnz_a,
        nnz_b,
        nnz_c,
    } = *row;
    match format {
        TableFormat::Markdown => format!(
            "| problem | n | m | nnz(A) | nnz(B) | nnz(C) |\n|---|---|---|---|---|---|\n\
             | {label} | {n} | {m} | {nnz_a} | {nnz_b} | {nnz_c} |\n"
        ),
        TableFormat::Csv => {
            format!("problem,n,m,nnz_a,nnz_b,nnz_c\n{label},{n},{m},{nnz_a},{nnz_b},{nnz_c}\n")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stokes(s: usize, mu: f64) -> Problem {
        Problem::Stokes { s, mu, k: 2.0 }
    }

    fn row(converged: bool) -> TableRow {
        TableRow {
            label: "SS".into(),
            alpha_used: Some(0.1),
            iters: 8,
            cpu_seconds: 0.0123,
            final_rk: 8.43e-8,
            solver_rk: 8.43e-8,
            converged,
            fastest: false,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(
            emit_table(&[], TableFormat::Csv),
            "label,alpha,iters,cpu,Rk,converged\n"
        );
        assert_eq!(emit_table(&[], TableFormat::Markdown).lines().count(), 2);
    }

    #[test]
    fn converged_row_rendering() {
        let md = emit_table(&[row(true)], TableFormat::Markdown);
        assert_eq!(
            md.lines().nth(2).unwrap(),
            "| SS | 0.1 | 8 | 0.012 | 8.4e-8 | true |"
        );
        let csv = emit_table(&[row(true)], TableFormat::Csv);
        assert_eq!(csv.lines().nth(1).unwrap(), "SS,0.1,8,0.012300,8.4e-8,true");
    }

    #[test]
    fn dagger_rows() {
        let md = emit_table(&[row(false)], TableFormat::Markdown);
        assert!(md.lines().nth(2).unwrap().contains("| † |"));
        let csv = emit_table(&[row(false)], TableFormat::Csv);
        assert_eq!(csv.lines().nth(1).unwrap(), "SS,0.1,,0.012300,8.4e-8,false");
    }

    #[test]
    fn alpha_formatting() {
        assert_eq!(format_alpha(0.1), "0.1");
        assert_eq!(format_alpha(1.99884), "1.9988");
        assert_eq!(format_alpha(98.5), "98.5");
        assert_eq!(format_alpha(1e-4), "1.0e-4");
        assert_eq!(format_rk(5.94e-8), "5.9e-8");
    }

    #[test]
    fn small_stokes_experiment() {
        let cfg =
            ExperimentConfig::new(stokes(8, 1.0), Some(PrecondKind::Ss), AlphaMode::Fixed(0.1));
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!(r.converged && r.final_rk <= 1e-7);
        assert!((r.final_rk - r.solver_rk).abs() <= 1e-9);
        assert!(!r.fastest);

        // determinism
        let again = run_experiment(&cfg).unwrap();
        assert_eq!(again[0].iters, r.iters);
        assert_eq!(again[0].final_rk, r.final_rk);
    }

    #[test]
    fn sweep_rows_and_fastest_flag() {
        let mut cfg = ExperimentConfig::new(
            stokes(8, 1.0),
            Some(PrecondKind::Ss),
            AlphaMode::Sweep(vec![0.1, 0.05, 0.01]),
        );
        let rows = sweep_alpha(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().filter(|r| r.fastest).count(), 1);
        let alphas: Vec<_> = rows.iter().map(|r| r.alpha_used.unwrap()).collect();
        assert_eq!(alphas, vec![0.1, 0.05, 0.01]);
        // distinct α give distinct preconditioners, so rows differ
        assert!(rows
            .windows(2)
            .all(|w| w[0].iters != w[1].iters || w[0].final_rk != w[1].final_rk));

        cfg.alpha_mode = AlphaMode::Sweep(vec![0.05]);
        let single = sweep_alpha(&cfg).unwrap();
        cfg.alpha_mode = AlphaMode::Fixed(0.05);
        let fixed = run_experiment(&cfg).unwrap();
        assert_eq!(single[0].iters, fixed[0].iters);
        assert_eq!(single[0].final_rk, fixed[0].final_rk);
        assert!(sweep_alpha(&cfg).is_err());
    }

    #[test]
    fn est_mode_uses_alpha_est() {
        let cfg = ExperimentConfig::new(stokes(6, 1.0), Some(PrecondKind::Rss), AlphaMode::Est);
        let rows = run_experiment(&cfg).unwrap();
        let want = cfg
            .problem
            .build()
            .unwrap()
            .alpha_est(NORM_TOL_DEFAULT)
            .alpha;
        assert_eq!(rows[0].alpha_used, Some(want));
    }

    #[test]
    fn non_convergence_is_a_row_not_an_error() {
        let mut cfg = ExperimentConfig::new(stokes(8, 1.0), None, AlphaMode::Est);
        cfg.rule.max_outer = 5;
        let rows = run_experiment(&cfg).unwrap();
        assert!(!rows[0].converged && rows[0].iters == 5);
        assert!(rows[0].final_rk > 1e-7);
        assert_eq!(rows[0].label, "none");
        assert_eq!(rows[0].alpha_used, None);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ExperimentConfig::new(
                stokes(8, 1.0),
                Some(PrecondKind::Ss),
                AlphaMode::Sweep(vec![]),
            ),
            ExperimentConfig::new(
                stokes(8, 1.0),
                Some(PrecondKind::Ss),
                AlphaMode::Fixed(-1.0),
            ),
            ExperimentConfig::new(stokes(0, 1.0), None, AlphaMode::Est),
        ];
        for cfg in &bad {
            assert!(run_experiment(cfg).is_err(), "{cfg:?}");
        }
        let missing = ExperimentConfig::new(
            Problem::External {
                path: "/nonexistent.mtx".into(),
                n: 2,
                m: 1,
            },
            None,
            AlphaMode::Est,
        );
        assert!(matches!(run_experiment(&missing), Err(Error::Io { .. })));
    }

    #[test]
    fn external_problem_and_spectrum_export() {
        let sys = build_stokes(3, 1.0, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mtx = dir.path().join("stokes3.mtx");
        crate::matrix_market::write_matrix_market(&sys.assemble(), &mtx).unwrap();

        let mut cfg = ExperimentConfig::new(
            Problem::External {
                path: mtx,
                n: sys.n(),
                m: sys.m(),
            },
            Some(PrecondKind::Ss),
            AlphaMode::Sweep(vec![0.5, 2.0]),
        );
        cfg.spectrum_out = Some(dir.path().join("spec.csv"));
        let rows = run_experiment(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.converged));
        for i in 0..2 {
            let rep = crate::spectrum::read_spectrum_csv(dir.path().join(format!("spec_{i}.csv")))
                .unwrap();
            assert_eq!(rep.eigenvalues.len(), sys.order());
            assert_eq!(rep.label, "SS");
        }
    }

    #[test]
    fn structure_table() {
        let row = StructureRow::of(&build_stokes(16, 1.0, 2.0).unwrap());
        assert_eq!(
            emit_structure("s=16", &row, TableFormat::Csv),
            "problem,n,m,nnz_a,nnz_b,nnz_c\ns=16,512,256,2432,992,992\n"
        );
    }
}
