//! Krylov solvers: CG, restarted GMRES and flexible GMRES.
//!
//! All solvers measure `R_k = ‖b − op(x_k)‖₂ / ‖b‖₂` and record it once per
//! iteration, starting with the initial guess.

use std::time::Instant;

use crate::error::{check_len, Error, Result};
use crate::operator::{vec_ops, LinearOperator};

/// Outer and inner stopping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    /// Relative residual target for the outer solve.
    pub rel_tol: f64,
    pub max_outer: usize,
    /// Inner solves stop once the residual drops by this factor (`1e-2`
    /// means a reduction by `10²`).
    pub inner_reduction: f64,
    pub max_inner: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            max_outer: 1000,
            inner_reduction: 1e-2,
            max_inner: 100,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.rel_tol < 1.0
            && self.inner_reduction > 0.0
            && self.inner_reduction < 1.0
            && self.max_outer > 0
            && self.max_inner > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid stopping rule {self:?}"
            )))
        }
    }

    /// The rule an inner solve runs under.
    pub fn inner(&self) -> Self {
        Self {
            rel_tol: self.inner_reduction,
            max_outer: self.max_inner,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// CG met `pᵀAp ≤ 0`, or GMRES hit an unproductive breakdown.
    Breakdown,
    /// A full GMRES cycle made no relative progress.
    Stagnation,
    /// The stationary iteration blew past its divergence guard.
    Divergence,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// One entry per iteration; entry 0 is the initial guess.
    pub relative_residuals: Vec<f64>,
    pub wall_seconds: f64,
    pub inner_iterations_total: usize,
    /// Preconditioner applications whose inner solve missed its target.
    pub inner_failures: usize,
    pub final_solution: Vec<f64>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.relative_residuals.last().unwrap_or(&f64::NAN)
    }
}

/// Outcome of one preconditioner application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerStats {
    pub iterations: usize,
    pub converged: bool,
}

impl InnerStats {
    pub const EXACT: Self = Self {
        iterations: 0,
        converged: true,
    };

    pub fn merge(self, other: Self) -> Self {
        Self {
            iterations: self.iterations + other.iterations,
            converged: self.converged && other.converged,
        }
    }
}

/// `z ≈ P⁻¹r`. May change from call to call.
pub trait Preconditioner {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) -> InnerStats;
}

impl<F: FnMut(&[f64], &mut [f64]) -> InnerStats> Preconditioner for F {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) -> InnerStats {
        self(r, z)
    }
}

/// `z = r`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPreconditioner;

impl Preconditioner for NoPreconditioner {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) -> InnerStats {
        z.copy_from_slice(r);
        InnerStats::EXACT
    }
}

fn initial_guess(n: usize, x0: Option<&[f64]>) -> Result<Vec<f64>> {
    match x0 {
        Some(x) => {
            check_len(n, x.len(), "initial guess")?;
            Ok(x.to_vec())
        }
        None => Ok(vec![0.0; n]),
    }
}

fn check_square(op: &dyn LinearOperator, b: &[f64]) -> Result<usize> {
    let n = op.nrows();
    check_len(n, op.ncols(), "square operator")?;
    check_len(n, b.len(), "right-hand side")?;
    Ok(n)
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = op.apply_alloc(x);
    vec_ops::sub(b, &ax)
}

fn trivial_report(n: usize, started: Instant) -> SolveReport {
    SolveReport {
        iterations: 0,
        converged: true,
        termination: Termination::Converged,
        relative_residuals: vec![0.0],
        wall_seconds: started.elapsed().as_secs_f64(),
        inner_iterations_total: 0,
        inner_failures: 0,
        final_solution: vec![0.0; n],
    }
}

/// Conjugate gradients for a symmetric positive definite `op`.
///
/// Terminates with [`Termination::Breakdown`] when a search direction has
/// non-positive curvature, which flags an operator that is not SPD.
pub fn cg(
    op: &dyn LinearOperator,
    b: &[f64],
    rule: &StoppingRule,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    let started = Instant::now();
    let n = check_square(op, b)?;
    let bnorm = vec_ops::norm2(b);
    if bnorm == 0.0 {
        return Ok(trivial_report(n, started));
    }
    let mut x = initial_guess(n, x0)?;
    let mut r = residual(op, b, &x);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = vec_ops::dot(&r, &r);
    let mut history = vec![rr.sqrt() / bnorm];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    if history[0] <= rule.rel_tol {
        termination = Termination::Converged;
    }
    while termination == Termination::MaxIterations && iterations < rule.max_outer {
        op.apply(&p, &mut ap);
        let curvature = vec_ops::dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            termination = Termination::Breakdown;
            break;
        }
        let step = rr / curvature;
        vec_ops::axpy(step, &p, &mut x);
        vec_ops::axpy(-step, &ap, &mut r);
        iterations += 1;
        let rr_next = vec_ops::dot(&r, &r);
        history.push(rr_next.sqrt() / bnorm);
        if rr_next.sqrt() / bnorm <= rule.rel_tol {
            termination = Termination::Converged;
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }

    Ok(SolveReport {
        iterations,
        converged: termination == Termination::Converged,
        termination,
        relative_residuals: history,
        wall_seconds: started.elapsed().as_secs_f64(),
        inner_iterations_total: 0,
        inner_failures: 0,
        final_solution: x,
    })
}

/// Restarted GMRES(`restart`) with modified Gram–Schmidt and Givens
/// rotations. The true residual is recomputed at every restart.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[f64],
    restart: usize,
    rule: &StoppingRule,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    arnoldi_solve(op, b, None, restart, rule, x0)
}

/// Flexible GMRES with right preconditioning, unrestarted (the Krylov basis
/// may grow up to `rule.max_outer`).
pub fn fgmres(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: &mut dyn Preconditioner,
    rule: &StoppingRule,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    arnoldi_solve(op, b, Some(precond), rule.max_outer, rule, x0)
}

/// Flexible GMRES restarted every `restart` iterations.
pub fn fgmres_restarted(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: &mut dyn Preconditioner,
    restart: usize,
    rule: &StoppingRule,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    arnoldi_solve(op, b, Some(precond), restart, rule, x0)
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Shared Arnoldi driver. With a preconditioner the basis images `Z` are
/// stored and the update uses them (flexible variant); without one the
/// update uses the Krylov basis itself.
fn arnoldi_solve(
    op: &dyn LinearOperator,
    b: &[f64],
    mut precond: Option<&mut dyn Preconditioner>,
    restart: usize,
    rule: &StoppingRule,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    let started = Instant::now();
    let n = check_square(op, b)?;
    if restart == 0 {
        return Err(Error::InvalidParameter(
            "restart length must be positive".into(),
        ));
    }
    let bnorm = vec_ops::norm2(b);
    if bnorm == 0.0 {
        return Ok(trivial_report(n, started));
    }
    let mut x = initial_guess(n, x0)?;
    let mut r = residual(op, b, &x);
    let mut beta = vec_ops::norm2(&r);
    let mut history = vec![beta / bnorm];
    let mut iterations = 0;
    let mut inner_total = 0;
    let mut inner_failures = 0;
    let mut termination = if beta / bnorm <= rule.rel_tol {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };

    let cycle = restart.min(n).min(rule.max_outer);
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    while termination == Termination::MaxIterations && iterations < rule.max_outer {
        let cycle_start_res = beta / bnorm;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cycle + 1);
        let mut images: Vec<Vec<f64>> = Vec::new();
        // column-major Hessenberg, column j has j+2 entries
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(cycle);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(cycle);
        let mut g = vec![beta];

        let mut v0 = r.clone();
        vec_ops::scale(1.0 / beta, &mut v0);
        basis.push(v0);

        let mut breakdown = false;
        let mut done = false;
        for j in 0..cycle {
            if iterations >= rule.max_outer {
                break;
            }
            // w = op(M⁻¹ v_j)
            match precond.as_deref_mut() {
                Some(p) => {
                    let stats = p.precondition(&basis[j], &mut z);
                    inner_total += stats.iterations;
                    if !stats.converged {
                        inner_failures += 1;
                    }
                    op.apply(&z, &mut w);
                    images.push(z.clone());
                }
                None => op.apply(&basis[j], &mut w),
            }
            let wnorm_before = vec_ops::norm2(&w);
            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = vec_ops::dot(&w, v);
                h[i] = hij;
                vec_ops::axpy(-hij, v, &mut w);
            }
            let hnext = vec_ops::norm2(&w);
            h[j + 1] = hnext;

            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (h[i], h[i + 1]);
                h[i] = c * a + s * bb;
                h[i + 1] = -s * a + c * bb;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            h[j] = c * h[j] + s * h[j + 1];
            h[j + 1] = 0.0;
            cs.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            hess.push(h);
            iterations += 1;

            let rel = g[j + 1].abs() / bnorm;
            history.push(rel);

            if rel <= rule.rel_tol {
                done = true;
                break;
            }
            if hnext <= 1e-14 * wnorm_before.max(f64::MIN_POSITIVE) || !hnext.is_finite() {
                breakdown = true;
                break;
            }
            let mut v = w.clone();
            vec_ops::scale(1.0 / hnext, &mut v);
            basis.push(v);
        }

        // back substitution on the triangular system
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, col) in hess.iter().enumerate().skip(i + 1) {
                s -= col[i] * y[jj];
            }
            y[i] = s / hess[i][i];
        }
        let dirs = if precond.is_some() { &images } else { &basis };
        for (yi, d) in y.iter().zip(dirs) {
            vec_ops::axpy(*yi, d, &mut x);
        }

        if done {
            termination = Termination::Converged;
            break;
        }
        r = residual(op, b, &x);
        beta = vec_ops::norm2(&r);
        let true_rel = beta / bnorm;
        if true_rel <= rule.rel_tol {
            if let Some(last) = history.last_mut() {
                *last = true_rel;
            }
            termination = Termination::Converged;
            break;
        }
        if breakdown {
            termination = Termination::Breakdown;
            break;
        }
        if iterations >= rule.max_outer {
            break;
        }
        if cycle_start_res - true_rel < 1e-14 * cycle_start_res {
            termination = Termination::Stagnation;
            break;
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
