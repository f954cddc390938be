//! Spectra of preconditioned saddle matrices, plus the containment checks
//! for shift-splitting and the relaxed variant. Desk scale only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::dense::{eigvals, ComplexList, DenseMatrix};
use crate::error::{Error, Result};
use crate::krylov::StoppingRule;
use crate::operator::LinearOperator;
use crate::precond::{InnerPolicy, PrecondKind, PrecondSpec, SaddlePreconditioner};
use crate::saddle::{SaddleSystem, DESK_SCALE};

/// Default tolerance of the containment checks.
pub const CONTAINMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Containment {
    pub disk_center: (f64, f64),
    pub disk_radius: f64,
    pub all_inside: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub label: String,
    pub alpha: Option<f64>,
    pub eigenvalues: ComplexList,
    pub containment: Option<Containment>,
}

fn desk_scale(sys: &SaddleSystem) -> Result<()> {
    if sys.is_desk_scale() {
        Ok(())
    } else {
        Err(Error::ScaleCap {
            order: sys.order(),
            limit: DESK_SCALE,
        })
    }
}

/// Dense `P⁻¹𝒜` under exact preconditioner solves. For SS this is
/// `(αI + 𝒜)⁻¹𝒜` without the `1/2` factor.
pub fn preconditioned_matrix(sys: &SaddleSystem, spec: &PrecondSpec) -> Result<DenseMatrix> {
    desk_scale(sys)?;
    let mut spec = *spec;
    spec.inner_policy = InnerPolicy::Direct;
    let p = SaddlePreconditioner::new(sys, spec)?;
    let order = sys.order();
    let mut e = vec![0.0; order];
    DenseMatrix::from_columns(order, order, |j| {
        e[j] = 1.0;
        let col = sys.apply_alloc(&e);
        e[j] = 0.0;
        Ok(p.apply(&col)?.0)
    })
}

pub fn preconditioned_spectrum(sys: &SaddleSystem, spec: &PrecondSpec) -> Result<SpectrumReport> {
    let m = preconditioned_matrix(sys, spec)?;
    Ok(SpectrumReport {
        label: spec.kind.label().to_string(),
        alpha: Some(spec.alpha()),
        eigenvalues: eigvals(&m)?,
        containment: None,
    })
}

/// Spectrum of `𝒜` itself.
pub fn unpreconditioned_spectrum(sys: &SaddleSystem) -> Result<SpectrumReport> {
    let full = sys.to_dense()?;
    Ok(SpectrumReport {
        label: "none".to_string(),
        alpha: None,
        eigenvalues: eigvals(&full)?,
        containment: None,
    })
}

/// `Re λ > −tol`, `|λ| < 1 + tol` and `|λ − ½| ≤ ½ + tol` for every `λ`.
pub fn disk_test(eigs: &[Complex64], tol: f64) -> bool {
    let half = Complex64::new(0.5, 0.0);
    eigs.iter()
        .all(|z| z.re > -tol && z.norm() < 1.0 + tol && (z - half).norm() <= 0.5 + tol)
}

/// Checks that `(αI + 𝒜)⁻¹𝒜` is positive stable with spectrum inside the
/// disk of radius ½ centred at ½. The report carries the spectrum.
pub fn verify_ss_containment(
    sys: &SaddleSystem,
    alpha: f64,
    tol: f64,
) -> Result<(bool, SpectrumReport)> {
    let spec = PrecondSpec::new(
        PrecondKind::Ss,
        alpha,
        InnerPolicy::Direct,
        StoppingRule::default(),
    )?;
    let mut report = preconditioned_spectrum(sys, &spec)?;
    let holds = disk_test(&report.eigenvalues, tol);
    report.containment = Some(Containment {
        disk_center: (0.5, 0.0),
        disk_radius: 0.5,
        all_inside: holds,
    });
    Ok((holds, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RssStructureReport {
    pub multiplicity_ok: bool,
    /// Largest deviation of the first `n` columns of `P⁻¹𝒜` from `[I; 0]`.
    pub identity_block_error: f64,
    pub secondary_eigs: ComplexList,
}

/// For the relaxed preconditioner, `P⁻¹𝒜 = [[I, *], [0, S]]` with
/// `S = (1/α) C (A + BᵀC/α)⁻¹ Bᵀ`. Checks the identity block column by
/// column and returns the eigenvalues of `S`.
pub fn verify_rss_structure(
    sys: &SaddleSystem,
    alpha: f64,
    tol: f64,
) -> Result<RssStructureReport> {
    desk_scale(sys)?;
    let spec = PrecondSpec::new(
        PrecondKind::Rss,
        alpha,
        InnerPolicy::Direct,
        StoppingRule::default(),
    )?;
    let p = SaddlePreconditioner::new(sys, spec)?;
    let (n, m) = (sys.n(), sys.m());

    let mut e = vec![0.0; n + m];
    let mut err: f64 = 0.0;
    for j in 0..n {
        e[j] = 1.0;
        let (col, _) = p.apply(&sys.apply_alloc(&e))?;
        e[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            err = err.max((v - want).abs());
        }
    }

    // S column by column through a dense LU of A + BᵀC/α
    let a = sys.a().to_dense();
    let btc = sys.bt().to_dense().matmul(&sys.c().to_dense())?;
    let lu = a.add(&btc, 1.0 / alpha)?.lu()?;
    let bt = sys.bt();
    let c = sys.c();
    let mut unit = vec![0.0; m];
    let s = DenseMatrix::from_columns(m, m, |j| {
        unit[j] = 1.0;
        let y = lu.solve(&bt.apply_alloc(&unit))?;
        unit[j] = 0.0;
        Ok(c.apply_alloc(&y).into_iter().map(|v| v / alpha).collect())
    })?;

    Ok(RssStructureReport {
        multiplicity_ok: err <= tol,
        identity_block_error: err,
        secondary_eigs: eigvals(&s)?,
    })
}

fn sorted(eigs: &[Complex64]) -> Vec<Complex64> {
    let mut v = eigs.to_vec();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

/// Largest distance in a greedy nearest-neighbour pairing of two multisets,
/// or infinity when the sizes differ.
pub fn multiset_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for z in sorted(a) {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, w)| (k, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("sizes match");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

/// `# label,alpha` then one `re,im` line per eigenvalue, sorted by `(re, im)`.
pub fn format_spectrum_csv(report: &SpectrumReport) -> String {
    let mut out = String::new();
    let alpha = report.alpha.map(|a| a.to_string()).unwrap_or_default();
    writeln!(out, "# {},{}", report.label, alpha).unwrap();
    for z in sorted(&report.eigenvalues) {
        // + 0.0 turns -0 into 0
        writeln!(out, "{},{}", z.re + 0.0, z.im + 0.0).unwrap();
    }
    out
}

pub fn export_spectrum_csv(report: &SpectrumReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_spectrum_csv(report)).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Inverse of [`format_spectrum_csv`]; `containment` is not stored.
pub fn parse_spectrum_csv(text: &str, origin: &Path) -> Result<SpectrumReport> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let head = head
        .strip_prefix("# ")
        .ok_or_else(|| err(1, "missing `# label,alpha` line".into()))?;
    let (label, alpha) = head
        .rsplit_once(',')
        .ok_or_else(|| err(1, "missing `# label,alpha` line".into()))?;
    let alpha = if alpha.is_empty() {
        None
    } else {
        Some(
            alpha
                .parse()
                .map_err(|_| err(1, format!("invalid alpha `{alpha}`")))?,
        )
    };
    let mut eigenvalues = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(re, im)| Some(Complex64::new(re.parse().ok()?, im.parse().ok()?)));
        eigenvalues
            .push(parsed.ok_or_else(|| err(idx + 1, format!("expected `re,im`, got `{line}`")))?);
    }
    Ok(SpectrumReport {
        label: label.to_string(),
        alpha,
        eigenvalues,
        containment: None,
    })
}

pub fn read_spectrum_csv(path: impl AsRef<Path>) -> Result<SpectrumReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_spectrum_csv(&text, path)
}
