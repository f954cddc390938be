//! The stationary shift-splitting iteration
//!
//! ```text
//! (αI + 𝒜) x⁽ᵏ⁺¹⁾ = (αI − 𝒜) x⁽ᵏ⁾ + 2f
//! ```
//!
//! and desk-scale analysis of its iteration matrix
//! `M_α = (αI + 𝒜)⁻¹(αI − 𝒜)`.
//!
//! For an eigenpair `(λ, [x; y])` of `M_α` with `‖x‖₂ = 1`, write
//! `a = x*Ax`, `s + ti = x*BᵀCx`. Then
//! `α²(λ−1)² + α(λ²−1)a + (λ+1)²(s+ti) = 0`, and `|λ| < 1` whenever
//! `s > 0` and `|t| < a√s`.

use std::time::Instant;

use num_complex::Complex64;

use crate::dense::{
    eigvals, inverse_iteration, roots_in_unit_disk_complex, roots_in_unit_disk_real, DenseMatrix,
};
use crate::error::{check_len, Error, Result};
use crate::krylov::{SolveReport, StoppingRule, Termination};
use crate::operator::{vec_ops, LinearOperator};
use crate::precond::{InnerPolicy, PrecondKind, PrecondSpec, SaddlePreconditioner};
use crate::saddle::{SaddleSystem, DESK_SCALE};

/// Relative residual above which the iteration is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// Runs the SS iteration in update form `x ← x + 2(αI + 𝒜)⁻¹(f − 𝒜x)`.
pub fn ss_solve(
    sys: &SaddleSystem,
    f: &[f64],
    alpha: f64,
    policy: InnerPolicy,
    rule: &StoppingRule,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    let started = Instant::now();
    check_len(sys.order(), f.len(), "right-hand side")?;
    let spec = PrecondSpec::new(PrecondKind::Ss, alpha, policy, *rule)?;
    let precond = SaddlePreconditioner::new(sys, spec)?;

    let mut x = match x0 {
        Some(x0) => {
            check_len(sys.order(), x0.len(), "initial guess")?;
            x0.to_vec()
        }
        None => vec![0.0; sys.order()],
    };
    let fnorm = vec_ops::norm2(f);
    let mut r = vec_ops::sub(f, &sys.apply_alloc(&x));
    let rel = |r: &[f64]| {
        if fnorm == 0.0 {
            vec_ops::norm2(r)
        } else {
            vec_ops::norm2(r) / fnorm
        }
    };
    let mut history = vec![rel(&r)];
    let mut termination = if history[0] <= rule.rel_tol {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    let mut iterations = 0;
    let mut inner_total = 0;
    let mut inner_failures = 0;

    while termination == Termination::MaxIterations && iterations < rule.max_outer {
        let (z, stats) = precond.apply(&r)?;
        inner_total += stats.iterations;
        if !stats.converged {
            inner_failures += 1;
        }
        vec_ops::axpy(2.0, &z, &mut x);
        iterations += 1;
        r = vec_ops::sub(f, &sys.apply_alloc(&x));
        let rk = rel(&r);
        history.push(rk);
        if rk <= rule.rel_tol {
            termination = Termination::Converged;
        } else if rk > DIVERGENCE_GUARD || !rk.is_finite() {
            termination = Termination::Divergence;
        }
    }

    Ok(SolveReport {
        iterations,
        converged: termination == Termination::Converged,
        termination,
        relative_residuals: history,
        wall_seconds: started.elapsed().as_secs_f64(),
        inner_iterations_total: inner_total,
        inner_failures,
        final_solution: x,
    })
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

/// `M_α = (αI + 𝒜)⁻¹(αI − 𝒜)`, assembled column by column.
pub fn iteration_matrix(sys: &SaddleSystem, alpha: f64) -> Result<DenseMatrix> {
    desk_scale(sys)?;
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let order = sys.order();
    let full = sys.to_dense()?;
    let eye = DenseMatrix::identity(order);
    let lu = full.add(&eye, alpha)?.lu()?;
    let rhs = eye.scale(alpha).add(&full, -1.0)?;
    DenseMatrix::from_columns(order, order, |j| lu.solve(&rhs.column(j)))
}

/// `max |λ|` over the spectrum of `M_α`.
pub fn spectral_radius(sys: &SaddleSystem, alpha: f64) -> Result<f64> {
    let m = iteration_matrix(sys, alpha)?;
    Ok(eigvals(&m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Per-eigenpair quantities of `M_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    pub lambda: Complex64,
    /// `x*Ax` for the normalized velocity part `x`.
    pub a: f64,
    /// `Re(x*BᵀCx)`
    pub s: f64,
    /// `Im(x*BᵀCx)`
    pub t: f64,
    /// `s > 0` and `|t| < a√s`.
    pub condition_holds: bool,
    /// `‖x‖₂ / ‖[x; y]‖₂` before normalization.
    pub velocity_fraction: f64,
    /// `‖M_α v − λv‖₂` of the computed eigenvector.
    pub eigen_residual: f64,
}

impl EigenData {
    /// `φ, ψ` of `λ² + φλ + ψ = 0`.
    pub fn quadratic_coefficients(&self, alpha: f64) -> (Complex64, Complex64) {
        let st = Complex64::new(self.s, self.t);
        let a2 = alpha * alpha;
        let denom = a2 + alpha * self.a + st;
        let phi = 2.0 * (st - a2) / denom;
        let psi = (a2 - alpha * self.a + st) / denom;
        (phi, psi)
    }

    /// `α²(λ−1)² + α(λ²−1)a + (λ+1)²(s+ti)`; zero for an exact eigenpair.
    pub fn quadratic_residual(&self, alpha: f64) -> Complex64 {
        let l = self.lambda;
        let one = Complex64::new(1.0, 0.0);
        alpha * alpha * (l - one) * (l - one)
            + alpha * (l * l - one) * self.a
            + (l + one) * (l + one) * Complex64::new(self.s, self.t)
    }

    /// Root-location verdict for the quadratic, through the real criterion
    /// when `t` vanishes and the complex one otherwise.
    pub fn roots_inside_unit_disk(&self, alpha: f64) -> bool {
        let (phi, psi) = self.quadratic_coefficients(alpha);
        let scale = self.a.abs() + self.s.abs() + alpha * alpha;
        if self.t.abs() <= 1e-10 * scale {
            roots_in_unit_disk_real(-phi.re, psi.re)
        } else {
            roots_in_unit_disk_complex(-phi, psi)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SsConvergenceReport {
    pub alpha: f64,
    pub spectral_radius: f64,
    pub eigdata: Vec<EigenData>,
    /// `C = kB` with `k > 0`.
    pub coupling_proportional: bool,
}

impl SsConvergenceReport {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.eigdata.iter().map(|d| d.lambda).collect()
    }

    pub fn condition_holds_everywhere(&self) -> bool {
        self.eigdata.iter().all(|d| d.condition_holds)
    }
}

/// Eigen-decomposes `M_α` and evaluates `a`, `s`, `t` on each eigenvector.
pub fn analyze_convergence(sys: &SaddleSystem, alpha: f64) -> Result<SsConvergenceReport> {
    let m = iteration_matrix(sys, alpha)?;
    let lambdas = eigvals(&m)?;
    let n = sys.n();
    let a_mat = sys.a();
    let (b, c) = (sys.b(), sys.c());

    let mut eigdata: Vec<EigenData> = Vec::with_capacity(lambdas.len());
    for (idx, &lambda) in lambdas.iter().enumerate() {
        // conjugate partner: reuse the conjugated vector
        if lambda.im < 0.0 {
            if let Some(prev) = eigdata[..idx]
                .iter()
                .rev()
                .find(|d| (d.lambda - lambda.conj()).norm() <= 1e-14 * (1.0 + lambda.norm()))
            {
                let mut d = *prev;
                d.lambda = lambda;
                d.t = -d.t;
                eigdata.push(d);
                continue;
            }
        }
        let (v, eigen_residual) = inverse_iteration(&m, lambda)?;
        let total = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let xnorm = v[..n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let x: Vec<Complex64> = v[..n].iter().map(|z| z / xnorm).collect();

        let a = hermitian_form(a_mat, &x, &x).re;
        let btc = hermitian_form_pair(b, c, &x);
        let (s, t) = (btc.re, btc.im);
        eigdata.push(EigenData {
            lambda,
            a,
            s,
            t,
            condition_holds: s > 0.0 && t.abs() < a * s.sqrt(),
            velocity_fraction: xnorm / total,
            eigen_residual,
        });
    }
    let spectral_radius = lambdas.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(SsConvergenceReport {
        alpha,
        spectral_radius,
        eigdata,
        coupling_proportional: sys.c_equals_kb().is_some_and(|k| k > 0.0),
    })
}

/// `uᴴ M w` for real sparse `M`.
fn hermitian_form(m: &crate::sparse::CsrMatrix, u: &[Complex64], w: &[Complex64]) -> Complex64 {
    (0..m.rows())
        .map(|i| {
            let mw: Complex64 = m.row(i).map(|(j, v)| w[j] * v).sum();
            u[i].conj() * mw
        })
        .sum()
}

/// `xᴴ BᵀC x = (Bx)ᴴ (Cx)`.
fn hermitian_form_pair(
    b: &crate::sparse::CsrMatrix,
    c: &crate::sparse::CsrMatrix,
    x: &[Complex64],
) -> Complex64 {
    let apply = |m: &crate::sparse::CsrMatrix| -> Vec<Complex64> {
        (0..m.rows())
            .map(|i| m.row(i).map(|(j, v)| x[j] * v).sum())
            .collect()
    };
    let (bx, cx) = (apply(b), apply(c));
    bx.iter().zip(&cx).map(|(p, q)| p.conj() * q).sum()
}

/// True when no eigenvalue lies within `tol` of `+1` or `−1`.
pub fn no_unit_eigenvalues(eigs: &[Complex64], tol: f64) -> bool {
    let one = Complex64::new(1.0, 0.0);
    eigs.iter()
        .all(|z| (z - one).norm() > tol && (z + one).norm() > tol)
}

/// `λ ≠ ±1` for every eigenvalue in the report (tolerance `1e-8`).
pub fn excludes_unit_eigenvalues(report: &SsConvergenceReport) -> bool {
    no_unit_eigenvalues(&report.eigenvalues(), 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::{build_stokes, toy_system};

    fn direct_rule(max_outer: usize) -> StoppingRule {
        StoppingRule {
            max_outer,
            ..Default::default()
        }
    }

    #[test]
    fn toy_iteration_matrix() {
        let m = iteration_matrix(&toy_system(), 1.0).unwrap();
        let want = [-0.5, -0.5, 0.5, 0.5];
        assert!(m
            .as_slice()
            .iter()
            .zip(want)
            .all(|(a, b)| (a - b).abs() < 1e-12));

        let m = iteration_matrix(&toy_system(), 1e8).unwrap();
        let diff = m.add(&DenseMatrix::identity(2), -1.0).unwrap();
        assert!(diff.max_abs() <= 1e-6);
    }

    #[test]
    fn toy_converges_in_two_steps() {
        let sys = toy_system();
        let f = sys.rhs_all_ones();
        let rule = StoppingRule {
            rel_tol: 1e-14,
            max_outer: 2,
            ..Default::default()
        };
        let rep = ss_solve(&sys, &f, 1.0, InnerPolicy::Direct, &rule, None).unwrap();
        let x = &rep.final_solution;
        assert!(
            (x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12,
            "{x:?}"
        );

        let rep = ss_solve(&sys, &f, 1.0, InnerPolicy::Direct, &rule, Some(&[1.0, 1.0])).unwrap();
        assert!(rep.converged && rep.iterations == 0);
    }

    #[test]
    fn toy_analysis() {
        let rep = analyze_convergence(&toy_system(), 1.0).unwrap();
        assert!(rep.spectral_radius < 1e-7);
        assert!(rep.coupling_proportional);
        for d in &rep.eigdata {
            assert!((d.a - 2.0).abs() < 1e-12 && (d.s - 1.0).abs() < 1e-12 && d.t.abs() < 1e-12);
            let (phi, psi) = d.quadratic_coefficients(1.0);
            // λ² = 0
            assert!(phi.norm() < 1e-12 && psi.norm() < 1e-12);
            assert!(d.condition_holds);
        }
        assert!(excludes_unit_eigenvalues(&rep));
    }

    #[test]
    fn identity_relating_iteration_matrix_and_preconditioned_matrix() {
        let sys = build_stokes(8, 1.0, 2.0).unwrap();
        let alpha = 0.7;
        let m = iteration_matrix(&sys, alpha).unwrap();
        let full = sys.to_dense().unwrap();
        let shifted = full
            .add(&DenseMatrix::identity(sys.order()), alpha)
            .unwrap();
        let lu = shifted.lu().unwrap();
        let lhs = DenseMatrix::from_columns(sys.order(), sys.order(), |j| {
            Ok(lu.solve(&full.column(j))?.iter().map(|v| 2.0 * v).collect())
        })
        .unwrap();
        let rhs = DenseMatrix::identity(sys.order()).add(&m, -1.0).unwrap();
        assert!(lhs.add(&rhs, -1.0).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn stokes_analysis_grid() {
        let sys = build_stokes(8, 1.0, 2.0).unwrap();
        for alpha in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let rep = analyze_convergence(&sys, alpha).unwrap();
            assert!(
                rep.spectral_radius < 1.0,
                "alpha {alpha}: {}",
                rep.spectral_radius
            );
            assert!(excludes_unit_eigenvalues(&rep));
            for d in &rep.eigdata {
                assert!(d.lambda.norm() < 1.0);
                assert!(d.a > 0.0);
                assert!(d.t.abs() <= 1e-10, "t = {}", d.t);
                assert!(d.velocity_fraction > 0.0);
                let scale = alpha * alpha + alpha * d.a + d.s.abs() + d.t.abs();
                assert!(
                    d.quadratic_residual(alpha).norm() <= 1e-6 * scale,
                    "alpha {alpha}, lambda {}: {}",
                    d.lambda,
                    d.quadratic_residual(alpha).norm() / scale
                );
            }
        }
    }

    #[test]
    fn root_predicates_agree_with_root_moduli() {
        let sys = build_stokes(5, 1.0, 2.0).unwrap();
        for alpha in [0.2, 3.0] {
            let rep = analyze_convergence(&sys, alpha).unwrap();
            for d in &rep.eigdata {
                let (phi, psi) = d.quadratic_coefficients(alpha);
                let disc = (phi * phi - 4.0 * psi).sqrt();
                let roots = [(-phi + disc) / 2.0, (-phi - disc) / 2.0];
                let inside = roots.iter().all(|z| z.norm() < 1.0);
                assert_eq!(d.roots_inside_unit_disk(alpha), inside);
                assert!(inside);
                // the computed eigenvalue is one of the roots
                assert!(roots.iter().any(|z| (z - d.lambda).norm() < 1e-6));
            }
        }
    }

    #[test]
    fn stationary_solve_contracts() {
        let sys = build_stokes(8, 1.0, 2.0).unwrap();
        let f = sys.rhs_all_ones();
        let rho = spectral_radius(&sys, 1.0).unwrap();
        let rule = direct_rule(30);
        let rep = ss_solve(&sys, &f, 1.0, InnerPolicy::Direct, &rule, None).unwrap();
        assert_eq!(rep.iterations, 30);
        // replay the last few steps and measure the error contraction
        let mut x = vec![0.0; sys.order()];
        let mut errors = Vec::new();
        let p = SaddlePreconditioner::new(
            &sys,
            PrecondSpec::new(PrecondKind::Ss, 1.0, InnerPolicy::Direct, rule).unwrap(),
        )
        .unwrap();
        for _ in 0..30 {
            let r = vec_ops::sub(&f, &sys.apply_alloc(&x));
            let (z, _) = p.apply(&r).unwrap();
            vec_ops::axpy(2.0, &z, &mut x);
            errors.push(x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>().sqrt());
        }
        for w in errors[errors.len() - 6..].windows(2) {
            assert!(w[1] <= (rho + 0.1) * w[0]);
        }
        assert_eq!(x, rep.final_solution);
    }

    #[test]
    fn divergence_guard() {
        // α > 0 but A indefinite: the iteration matrix has |λ| > 1
        let a =
            crate::sparse::CsrMatrix::from_triplets(2, 2, &[(0, 0, -3.0), (1, 1, 1.0)]).unwrap();
        let b = crate::sparse::CsrMatrix::from_triplets(1, 2, &[(0, 1, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b.clone(), b, Some(1.0)).unwrap();
        let f = sys.rhs_all_ones();
        let rep = ss_solve(
            &sys,
            &f,
            1.0,
            InnerPolicy::Direct,
            &direct_rule(10_000),
            None,
        )
        .unwrap();
        assert_eq!(rep.termination, Termination::Divergence);
        assert!(!rep.converged);
    }

    #[test]
    fn unit_eigenvalue_negative_control() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 0.3]]);
        assert!(!no_unit_eigenvalues(&eigvals(&m).unwrap(), 1e-8));
        let m = DenseMatrix::from_rows(&[&[-1.0, 0.0], &[0.0, 0.3]]);
        assert!(!no_unit_eigenvalues(&eigvals(&m).unwrap(), 1e-8));
        let m = DenseMatrix::from_rows(&[&[0.5, 0.0], &[0.0, 0.3]]);
        assert!(no_unit_eigenvalues(&eigvals(&m).unwrap(), 1e-8));
    }

    #[test]
    fn refuses_large_systems() {
        let sys = build_stokes(32, 1.0, 2.0).unwrap();
        assert!(matches!(
            iteration_matrix(&sys, 1.0),
            Err(Error::ScaleCap { .. })
        ));
    }
}
