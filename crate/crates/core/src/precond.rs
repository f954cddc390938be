//! Block preconditioners for `𝒜 = [A Bᵀ; −C 0]`.
//!
//! | kind | matrix                                  | applied as                      |
//! |------|-----------------------------------------|---------------------------------|
//! | SS   | `½(αI + 𝒜)`                             | `(αI + 𝒜)⁻¹`                    |
//! | RSS  | `[A Bᵀ; −C αI]`                         | `P_RSS⁻¹`                       |
//! | PPSS | `(1/2α)(αI + H)(αI + S)`                | `P_PPSS⁻¹`                      |
//! | AUG  | `[A + (1/α)BᵀC  Bᵀ; 0  αI]`             | `P_AUG⁻¹`                       |
//!
//! with `H = [A 0; 0 0]` and `S = [0 Bᵀ; −C 0]`. Each application reduces to
//! one or two solves with an `n×n` operator of the form
//! `σI + ωA + γBᵀC` ([`SchurOperator`]), performed by CG, GMRES(10) or a
//! dense LU depending on the [`InnerPolicy`].

use std::fmt;
use std::str::FromStr;

use crate::dense::{DenseMatrix, LuFactors};
use crate::error::{check_len, Error, Result};
use crate::krylov::{cg, gmres, InnerStats, Preconditioner, StoppingRule};
use crate::operator::{vec_ops, LinearOperator};
use crate::saddle::{SaddleSystem, DESK_SCALE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecondKind {
    Ss,
    Rss,
    Ppss,
    Aug,
}

impl PrecondKind {
    pub const ALL: [PrecondKind; 4] = [Self::Ss, Self::Rss, Self::Ppss, Self::Aug];

    pub fn label(self) -> &'static str {
        match self {
            Self::Ss => "SS",
            Self::Rss => "RSS",
            Self::Ppss => "PPSS",
            Self::Aug => "AUG",
        }
    }
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PrecondKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(Self::Ss),
            "rss" => Ok(Self::Rss),
            "ppss" => Ok(Self::Ppss),
            "aug" => Ok(Self::Aug),
            other => Err(Error::InvalidParameter(format!(
                "unknown preconditioner `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerPolicy {
    /// CG for SPD subsystems, GMRES(10) otherwise.
    #[default]
    Auto,
    Cg,
    Gmres10,
    /// Dense LU, desk scale only.
    Direct,
}

impl FromStr for InnerPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "cg" => Ok(Self::Cg),
            "gmres10" | "gmres" => Ok(Self::Gmres10),
            "direct" => Ok(Self::Direct),
            other => Err(Error::InvalidParameter(format!(
                "unknown inner policy `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondSpec {
    pub kind: PrecondKind,
    alpha: f64,
    pub inner_policy: InnerPolicy,
    pub rule: StoppingRule,
}

impl PrecondSpec {
    /// Rejects `α ≤ 0` and non-finite `α`.
    pub fn new(
        kind: PrecondKind,
        alpha: f64,
        inner_policy: InnerPolicy,
        rule: StoppingRule,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        rule.validate()?;
        Ok(Self {
            kind,
            alpha,
            inner_policy,
            rule,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// How one `n×n` subsystem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    Cg,
    Gmres { restart: usize },
    Direct,
}

/// `x ↦ σx + ωAx + γBᵀ(Cx)`, never assembled.
#[derive(Clone, Copy)]
pub struct SchurOperator<'a> {
    sys: &'a SaddleSystem,
    shift: f64,
    a_weight: f64,
    coupling: f64,
}

impl<'a> SchurOperator<'a> {
    pub fn new(sys: &'a SaddleSystem, shift: f64, a_weight: f64, coupling: f64) -> Self {
        Self {
            sys,
            shift,
            a_weight,
            coupling,
        }
    }

    /// `αI + A + (1/α)BᵀC`
    pub fn shifted(sys: &'a SaddleSystem, alpha: f64) -> Self {
        Self::new(sys, alpha, 1.0, 1.0 / alpha)
    }

    /// `A + (1/α)BᵀC`
    pub fn unshifted(sys: &'a SaddleSystem, alpha: f64) -> Self {
        Self::new(sys, 0.0, 1.0, 1.0 / alpha)
    }

    /// SPD under the standing assumption that `A` is SPD: the coupling
    /// term is PSD only when `C = kB` with `k > 0`.
    pub fn is_spd(&self) -> bool {
        let coupling_psd = self.coupling == 0.0 || self.sys.c_equals_kb().is_some_and(|k| k > 0.0);
        let definite = (self.a_weight > 0.0 && self.shift >= 0.0) || self.shift > 0.0;
        coupling_psd && self.a_weight >= 0.0 && definite
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if self.nrows() > DESK_SCALE {
            return Err(Error::ScaleCap {
                order: self.nrows(),
                limit: DESK_SCALE,
            });
        }
        Ok(DenseMatrix::from_operator(self))
    }
}

impl LinearOperator for SchurOperator<'_> {
    fn nrows(&self) -> usize {
        self.sys.n()
    }
    fn ncols(&self) -> usize {
        self.sys.n()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.sys.n());
        if self.a_weight != 0.0 {
            self.sys.a().spmv_into(x, y);
            if self.a_weight != 1.0 {
                vec_ops::scale(self.a_weight, y);
            }
        } else {
            y.iter_mut().for_each(|v| *v = 0.0);
        }
        if self.shift != 0.0 {
            vec_ops::axpy(self.shift, x, y);
        }
        if self.coupling != 0.0 {
            let mut cx = vec![0.0; self.sys.m()];
            self.sys.c().spmv_into(x, &mut cx);
            let mut btcx = vec![0.0; self.sys.n()];
            self.sys.bt().spmv_into(&cx, &mut btcx);
            vec_ops::axpy(self.coupling, &btcx, y);
        }
    }
}

/// Picks the solver for `op` under `policy`.
fn choose_solver(op: &SchurOperator<'_>, policy: InnerPolicy) -> Result<InnerSolver> {
    match policy {
        InnerPolicy::Auto if op.is_spd() => Ok(InnerSolver::Cg),
        InnerPolicy::Auto => Ok(InnerSolver::Gmres { restart: 10 }),
        InnerPolicy::Cg => Ok(InnerSolver::Cg),
        InnerPolicy::Gmres10 => Ok(InnerSolver::Gmres { restart: 10 }),
        InnerPolicy::Direct if op.nrows() <= DESK_SCALE => Ok(InnerSolver::Direct),
        InnerPolicy::Direct => Err(Error::ScaleCap {
            order: op.nrows(),
            limit: DESK_SCALE,
        }),
    }
}

/// Solver used for the main Schur subsystem of `spec.kind`.
pub fn select_inner(sys: &SaddleSystem, spec: &PrecondSpec) -> Result<InnerSolver> {
    let op = match spec.kind {
        PrecondKind::Ss => SchurOperator::shifted(sys, spec.alpha),
        PrecondKind::Rss | PrecondKind::Aug => SchurOperator::unshifted(sys, spec.alpha),
        PrecondKind::Ppss => SchurOperator::new(sys, spec.alpha, 0.0, 1.0 / spec.alpha),
    };
    choose_solver(&op, spec.inner_policy)
}

/// One subsystem with its solver and, for `Direct`, its factorization.
struct Stage<'a> {
    op: SchurOperator<'a>,
    solver: InnerSolver,
    lu: Option<LuFactors>,
    rule: StoppingRule,
}

impl<'a> Stage<'a> {
    fn new(op: SchurOperator<'a>, policy: InnerPolicy, rule: StoppingRule) -> Result<Self> {
        let solver = choose_solver(&op, policy)?;
        let lu = match solver {
            InnerSolver::Direct => Some(op.to_dense()?.lu()?),
            _ => None,
        };
        Ok(Self {
            op,
            solver,
            lu,
            rule: rule.inner(),
        })
    }

    fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, InnerStats)> {
        match self.solver {
            InnerSolver::Direct => {
                let lu = self.lu.as_ref().expect("factorized at construction");
                Ok((lu.solve(rhs)?, InnerStats::EXACT))
            }
            InnerSolver::Cg => {
                let rep = cg(&self.op, rhs, &self.rule, None)?;
                let stats = InnerStats {
                    iterations: rep.iterations,
                    converged: rep.converged,
                };
                Ok((rep.final_solution, stats))
            }
            InnerSolver::Gmres { restart } => {
                let rep = gmres(&self.op, rhs, restart, &self.rule, None)?;
                let stats = InnerStats {
                    iterations: rep.iterations,
                    converged: rep.converged,
                };
                Ok((rep.final_solution, stats))
            }
        }
    }
}

/// A ready-to-apply preconditioner bound to one system and one `α`.
pub struct SaddlePreconditioner<'a> {
    sys: &'a SaddleSystem,
    spec: PrecondSpec,
    /// SS/RSS/AUG: the Schur stage. PPSS: `αI + A`, then `αI + (1/α)BᵀC`.
    stages: Vec<Stage<'a>>,
}

impl<'a> SaddlePreconditioner<'a> {
    pub fn new(sys: &'a SaddleSystem, spec: PrecondSpec) -> Result<Self> {
        let alpha = spec.alpha;
        let ops = match spec.kind {
            PrecondKind::Ss => vec![SchurOperator::shifted(sys, alpha)],
            PrecondKind::Rss | PrecondKind::Aug => vec![SchurOperator::unshifted(sys, alpha)],
            PrecondKind::Ppss => vec![
                SchurOperator::new(sys, alpha, 1.0, 0.0),
                SchurOperator::new(sys, alpha, 0.0, 1.0 / alpha),
            ],
        };
        let stages = ops
            .into_iter()
            .map(|op| Stage::new(op, spec.inner_policy, spec.rule))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sys, spec, stages })
    }

    pub fn spec(&self) -> &PrecondSpec {
        &self.spec
    }

    /// Solver of each stage, in application order.
    pub fn inner_solvers(&self) -> Vec<InnerSolver> {
        self.stages.iter().map(|s| s.solver).collect()
    }

    /// Factor `c` with `apply(r) = c · P⁻¹r` for the preconditioner matrix
    /// `P` as defined (the SS apply drops the `½`).
    pub fn applied_scale(&self) -> f64 {
        match self.spec.kind {
            PrecondKind::Ss => 0.5,
            _ => 1.0,
        }
    }

    /// `z ≈ P⁻¹r` (up to [`applied_scale`](Self::applied_scale)).
    pub fn apply(&self, r: &[f64]) -> Result<(Vec<f64>, InnerStats)> {
        let (n, m) = (self.sys.n(), self.sys.m());
        check_len(n + m, r.len(), "preconditioner input")?;
        let alpha = self.spec.alpha;
        let (r1, r2) = r.split_at(n);
        let bt = self.sys.bt();
        let c = self.sys.c();

        let mut btv = vec![0.0; n];
        let mut cz = vec![0.0; m];
        let (z1, z2, stats) = match self.spec.kind {
            PrecondKind::Ss | PrecondKind::Rss => {
                // t = r₁ − (1/α)Bᵀr₂; S z₁ = t; z₂ = (Cz₁ + r₂)/α
                bt.spmv_into(r2, &mut btv);
                let mut t = r1.to_vec();
                vec_ops::axpy(-1.0 / alpha, &btv, &mut t);
                let (z1, stats) = self.stages[0].solve(&t)?;
                c.spmv_into(&z1, &mut cz);
                let z2: Vec<f64> = cz.iter().zip(r2).map(|(a, b)| (a + b) / alpha).collect();
                (z1, z2, stats)
            }
            PrecondKind::Aug => {
                // z₂ = r₂/α; S z₁ = r₁ − Bᵀz₂
                let z2: Vec<f64> = r2.iter().map(|v| v / alpha).collect();
                bt.spmv_into(&z2, &mut btv);
                let t = vec_ops::sub(r1, &btv);
                let (z1, stats) = self.stages[0].solve(&t)?;
                (z1, z2, stats)
            }
            PrecondKind::Ppss => {
                // (αI + H)w = r
                let (w1, s1) = self.stages[0].solve(r1)?;
                let w2: Vec<f64> = r2.iter().map(|v| v / alpha).collect();
                // (αI + S)u = w by eliminating the second block
                bt.spmv_into(&w2, &mut btv);
                let mut t = w1;
                vec_ops::axpy(-1.0 / alpha, &btv, &mut t);
                let (mut u1, s2) = self.stages[1].solve(&t)?;
                c.spmv_into(&u1, &mut cz);
                let mut u2: Vec<f64> = cz.iter().zip(&w2).map(|(a, b)| (a + b) / alpha).collect();
                vec_ops::scale(2.0 * alpha, &mut u1);
                vec_ops::scale(2.0 * alpha, &mut u2);
                (u1, u2, s1.merge(s2))
            }
        };
        let mut z = z1;
        z.extend(z2);
        Ok((z, stats))
    }

    /// The preconditioner matrix as defined, assembled densely.
    pub fn defining_matrix(&self) -> Result<DenseMatrix> {
        let sys = self.sys;
        let alpha = self.spec.alpha;
        let (n, order) = (sys.n(), sys.order());
        let full = sys.to_dense()?;
        let eye = DenseMatrix::identity(order);
        let shifted_full = full.add(&eye, alpha)?;
        Ok(match self.spec.kind {
            PrecondKind::Ss => shifted_full.scale(0.5),
            PrecondKind::Rss => {
                let mut p = full;
                for i in n..order {
                    p[(i, i)] = alpha;
                }
                p
            }
            PrecondKind::Ppss => {
                let mut h = DenseMatrix::identity(order).scale(alpha);
                let mut s = h.clone();
                for i in 0..order {
                    for j in 0..order {
                        let v = full[(i, j)];
                        if i < n && j < n {
                            h[(i, j)] += v;
                        } else {
                            s[(i, j)] += v;
                        }
                    }
                }
                h.matmul(&s)?.scale(1.0 / (2.0 * alpha))
            }
            PrecondKind::Aug => {
                let schur = SchurOperator::unshifted(sys, alpha).to_dense()?;
                let mut p = DenseMatrix::zeros(order, order);
                for i in 0..order {
                    for j in 0..order {
                        p[(i, j)] = if i < n && j < n {
                            schur[(i, j)]
                        } else if i < n {
                            full[(i, j)]
                        } else if i == j {
                            alpha
                        } else {
                            0.0
                        };
                    }
                }
                p
            }
        })
    }
}

impl Preconditioner for SaddlePreconditioner<'_> {
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) -> InnerStats {
        let (out, stats) = self
            .apply(r)
            .expect("preconditioner input length matches the system");
        z.copy_from_slice(&out);
        stats
    }
}

fn apply_once(
    sys: &SaddleSystem,
    kind: PrecondKind,
    alpha: f64,
    policy: InnerPolicy,
    rule: StoppingRule,
    r: &[f64],
) -> Result<(Vec<f64>, InnerStats)> {
    let spec = PrecondSpec::new(kind, alpha, policy, rule)?;
    SaddlePreconditioner::new(sys, spec)?.apply(r)
}

/// Shift-splitting: `(αI + 𝒜)⁻¹r` through the shifted Schur complement.
pub fn apply_ss(
    sys: &SaddleSystem,
    alpha: f64,
    policy: InnerPolicy,
    rule: StoppingRule,
    r: &[f64],
) -> Result<(Vec<f64>, InnerStats)> {
    apply_once(sys, PrecondKind::Ss, alpha, policy, rule, r)
}

/// Relaxed shift-splitting: `P_RSS⁻¹r` through the unshifted Schur complement.
pub fn apply_rss(
    sys: &SaddleSystem,
    alpha: f64,
    policy: InnerPolicy,
    rule: StoppingRule,
    r: &[f64],
) -> Result<(Vec<f64>, InnerStats)> {
    apply_once(sys, PrecondKind::Rss, alpha, policy, rule, r)
}

pub fn apply_ppss(
    sys: &SaddleSystem,
    alpha: f64,
    policy: InnerPolicy,
    rule: StoppingRule,
    r: &[f64],
) -> Result<(Vec<f64>, InnerStats)> {
    apply_once(sys, PrecondKind::Ppss, alpha, policy, rule, r)
}

pub fn apply_aug(
    sys: &SaddleSystem,
    alpha: f64,
    policy: InnerPolicy,
    rule: StoppingRule,
    r: &[f64],
) -> Result<(Vec<f64>, InnerStats)> {
    apply_once(sys, PrecondKind::Aug, alpha, policy, rule, r)
}
