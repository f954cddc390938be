//! Asymmetric saddle point systems
//!
//! ```text
//! 𝒜 = [ A   Bᵀ ]     A: n×n SPD,  B, C: m×n
//!     [ −C  0  ]
//! ```
//!
//! with the velocity block first and the pressure block second.

use crate::dense::{norm2_est, DenseMatrix, Norm2Estimate};
use crate::error::{check_len, Error, Result};
use crate::operator::{LinearOperator, TransposeOperator};
use crate::sparse::CsrMatrix;

/// Largest `n + m` for which dense checks and factorizations are attempted.
pub const DESK_SCALE: usize = 2000;

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    a: CsrMatrix,
    b: CsrMatrix,
    bt: CsrMatrix,
    c: CsrMatrix,
    c_equals_kb: Option<f64>,
}

impl SaddleSystem {
    /// Validates shapes. When `c_equals_kb` is `Some(k)`, `C` must equal
    /// `k·B` entrywise.
    pub fn new(a: CsrMatrix, b: CsrMatrix, c: CsrMatrix, c_equals_kb: Option<f64>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::InvalidDimension("A must be square".into()));
        }
        let m = b.rows();
        if b.cols() != n || c.shape() != (m, n) {
            return Err(Error::InvalidDimension(format!(
                "B {:?} and C {:?} must both be {m}x{n}",
                b.shape(),
                c.shape()
            )));
        }
        if m > n {
            return Err(Error::InvalidDimension(format!("m = {m} exceeds n = {n}")));
        }
        if let Some(k) = c_equals_kb {
            if c.add(&b, -k)?.nnz() != 0 {
                return Err(Error::InvalidStructure(format!("C differs from {k}·B")));
            }
        }
        let bt = b.transpose();
        Ok(Self {
            a,
            b,
            bt,
            c,
            c_equals_kb,
        })
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn b(&self) -> &CsrMatrix {
        &self.b
    }

    /// `Bᵀ`, stored explicitly.
    pub fn bt(&self) -> &CsrMatrix {
        &self.bt
    }

    pub fn c(&self) -> &CsrMatrix {
        &self.c
    }

    pub fn c_equals_kb(&self) -> Option<f64> {
        self.c_equals_kb
    }

    /// Velocity block size.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Pressure block size.
    pub fn m(&self) -> usize {
        self.b.rows()
    }

    pub fn order(&self) -> usize {
        self.n() + self.m()
    }

    pub fn is_desk_scale(&self) -> bool {
        self.order() <= DESK_SCALE
    }

    /// `𝒜x`, checked.
    pub fn block_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order(), x.len(), "saddle block apply")?;
        Ok(self.apply_alloc(x))
    }

    /// Right-hand side whose exact solution is the all-ones vector.
    pub fn rhs_all_ones(&self) -> Vec<f64> {
        self.apply_alloc(&vec![1.0; self.order()])
    }

    /// Assembles `𝒜` as one sparse matrix.
    pub fn assemble(&self) -> CsrMatrix {
        let n = self.n();
        let t: Vec<_> = self
            .a
            .triplets()
            .chain(self.bt.triplets().map(|(i, j, v)| (i, j + n, v)))
            .chain(self.c.triplets().map(|(i, j, v)| (i + n, j, -v)))
            .collect();
        CsrMatrix::from_triplets(self.order(), self.order(), &t).expect("blocks fit")
    }

    /// `‖BᵀC‖₂ / ‖A‖₂`, both norms by power iteration with `BᵀC` kept as
    /// an operator.
    pub fn alpha_est(&self, tol: f64) -> AlphaEstimate {
        let maxit = 10_000;
        let a_norm = norm2_est(&self.a, tol, maxit);
        let coupling = norm2_est(&CouplingOperator(self), tol, maxit);
        AlphaEstimate {
            alpha: coupling.value / a_norm.value,
            a_norm,
            coupling_norm: coupling,
        }
    }

    /// Structural hypotheses: `A` SPD, `rank B = rank C = m`. Definiteness
    /// and ranks are only decided at desk scale.
    pub fn check_assumptions(&self) -> AssumptionReport {
        let a_symmetric = self.a.is_symmetric();
        if !self.is_desk_scale() {
            return AssumptionReport {
                a_symmetric,
                a_positive_definite: false,
                rank_b_full: false,
                rank_c_full: false,
                checked_at_scale: false,
            };
        }
        let m = self.m();
        let rank_tol = 1e-12;
        AssumptionReport {
            a_symmetric,
            a_positive_definite: a_symmetric && self.a.to_dense().is_positive_definite(),
            rank_b_full: self.b.to_dense().rank(rank_tol) == m,
            rank_c_full: self.c.to_dense().rank(rank_tol) == m,
            checked_at_scale: true,
        }
    }

    /// Dense copy of `𝒜`; refused beyond desk scale.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if !self.is_desk_scale() {
            return Err(Error::ScaleCap {
                order: self.order(),
                limit: DESK_SCALE,
            });
        }
        Ok(self.assemble().to_dense())
    }
}

impl LinearOperator for SaddleSystem {
    fn nrows(&self) -> usize {
        self.order()
    }
    fn ncols(&self) -> usize {
        self.order()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.order());
        assert_eq!(y.len(), self.order());
        let n = self.n();
        let (x1, x2) = x.split_at(n);
        let (y1, y2) = y.split_at_mut(n);
        self.a.spmv_into(x1, y1);
        let mut tmp = vec![0.0; n];
        self.bt.spmv_into(x2, &mut tmp);
        for (yi, ti) in y1.iter_mut().zip(&tmp) {
            *yi += ti;
        }
        self.c.spmv_into(x1, y2);
        y2.iter_mut().for_each(|v| *v = -*v);
    }
}

/// `x ↦ Bᵀ(Cx)` with transpose `x ↦ Cᵀ(Bx)`.
pub struct CouplingOperator<'a>(pub &'a SaddleSystem);

impl LinearOperator for CouplingOperator<'_> {
    fn nrows(&self) -> usize {
        self.0.n()
    }
    fn ncols(&self) -> usize {
        self.0.n()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.0.m()];
        self.0.c.spmv_into(x, &mut t);
        self.0.bt.spmv_into(&t, y);
    }
}

impl TransposeOperator for CouplingOperator<'_> {
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.0.m()];
        self.0.b.spmv_into(x, &mut t);
        self.0.c.spmv_transpose_into(&t, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub a_norm: Norm2Estimate,
    pub coupling_norm: Norm2Estimate,
}

impl AlphaEstimate {
    pub fn converged(&self) -> bool {
        self.a_norm.converged && self.coupling_norm.converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionReport {
    pub a_symmetric: bool,
    pub a_positive_definite: bool,
    pub rank_b_full: bool,
    pub rank_c_full: bool,
    /// False when the system was too large for the dense checks; the
    /// definiteness and rank fields are then meaningless.
    pub checked_at_scale: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.checked_at_scale
            && self.a_symmetric
            && self.a_positive_definite
            && self.rank_b_full
            && self.rank_c_full
    }
}

/// The 2-D test problem: `A = blockdiag(I⊗T + T⊗I, I⊗T + T⊗I)`,
/// `Bᵀ = [I⊗F; F⊗I]`, `C = k·B` with `h = 1/(s+1)`,
/// `T = (μ/h²)·tridiag(−1, 2, −1)` and `F = (1/h)·tridiag(−1, 1, 0)`.
pub fn build_stokes(s: usize, mu: f64, k: f64) -> Result<SaddleSystem> {
    if s == 0 {
        return Err(Error::InvalidDimension(
            "grid size s must be at least 1".into(),
        ));
    }
    if !(mu > 0.0 && k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "viscosity and coupling must be positive (mu = {mu}, k = {k})"
        )));
    }
    let h = 1.0 / (s as f64 + 1.0);
    let t = CsrMatrix::tridiag(s, -1.0, 2.0, -1.0, mu / (h * h))?;
    let f = CsrMatrix::tridiag(s, -1.0, 1.0, 0.0, 1.0 / h)?;
    let i = CsrMatrix::identity(s);
    let lap = i.kron(&t)?.add(&t.kron(&i)?, 1.0)?;
    let a = CsrMatrix::block_diag(&lap, &lap);
    let bt = CsrMatrix::vstack(&i.kron(&f)?, &f.kron(&i)?)?;
    let b = bt.transpose();
    let c = b.scale(k);
    SaddleSystem::new(a, b, c, Some(k))
}

/// Splits an assembled `(n+m)×(n+m)` matrix into its blocks. The stored
/// (2,1) block is `−C`; the (2,2) block must vanish.
pub fn split_external(full: &CsrMatrix, n: usize, m: usize) -> Result<SaddleSystem> {
    let order = n + m;
    if full.shape() != (order, order) {
        return Err(Error::InvalidDimension(format!(
            "matrix is {:?}, expected {order}x{order} for n = {n}, m = {m}",
            full.shape()
        )));
    }
    let d = full.submatrix(n, order, n, order)?;
    if d.max_abs() > 1e-14 {
        return Err(Error::InvalidStructure(format!(
            "(2,2) block has entries up to {:e}",
            d.max_abs()
        )));
    }
    let a = full.submatrix(0, n, 0, n)?;
    let b = full.submatrix(0, n, n, order)?.transpose();
    let c = full.submatrix(n, order, 0, n)?.scale(-1.0);
    let k = detect_multiple(&b, &c);
    SaddleSystem::new(a, b, c, k)
}

/// `Some(k)` with `k > 0` when `C = k·B` exactly.
fn detect_multiple(b: &CsrMatrix, c: &CsrMatrix) -> Option<f64> {
    if b.nnz() == 0 || b.col_indices() != c.col_indices() || b.row_offsets() != c.row_offsets() {
        return None;
    }
    let k = c.values()[0] / b.values()[0];
    let exact = b.values().iter().zip(c.values()).all(|(x, y)| k * x == *y);
    (exact && k > 0.0).then_some(k)
}

/// `A = [2]`, `B = C = [1]`: the 2×2 system used by the hand-checked tests.
#[cfg(test)]
pub(crate) fn toy_system() -> SaddleSystem {
    let one = |v| CsrMatrix::from_triplets(1, 1, &[(0, 0, v)]).unwrap();
    SaddleSystem::new(one(2.0), one(1.0), one(1.0), Some(1.0)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::saddle::toy_system as toy;

    #[test]
    fn stokes_table_counts() {
        for (s, nnz_a, nnz_b) in [(16, 2432, 992), (32, 9984, 4032), (64, 40448, 16256)] {
            let sys = build_stokes(s, 1.0, 2.0).unwrap();
            assert_eq!((sys.n(), sys.m()), (2 * s * s, s * s));
            assert_eq!(sys.a().nnz(), nnz_a);
            assert_eq!(sys.b().nnz(), nnz_b);
            assert_eq!(sys.c().nnz(), nnz_b);
        }
    }

    #[test]
    fn stokes_single_cell() {
        let sys = build_stokes(1, 1.0, 1.0).unwrap();
        assert_eq!(sys.a().to_dense().as_slice(), &[16.0, 0.0, 0.0, 16.0]);
        assert_eq!(sys.bt().to_dense().as_slice(), &[2.0, 2.0]);
        assert_eq!(sys.c(), sys.b());
        assert_eq!(sys.rhs_all_ones(), vec![18.0, 18.0, -4.0]);
        assert!(build_stokes(0, 1.0, 1.0).is_err());
        assert!(build_stokes(2, -1.0, 1.0).is_err());
    }

    #[test]
    fn toy_block_apply() {
        let sys = toy();
        assert_eq!(sys.block_apply(&[1.0, 1.0]).unwrap(), vec![3.0, -1.0]);
        assert_eq!(sys.block_apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(sys.rhs_all_ones(), vec![3.0, -1.0]);
        assert!(sys.block_apply(&[1.0]).is_err());
        // xᵀ𝒜x = x₁ᵀAx₁ when B = C
        let x = [0.3, -1.7];
        let ax = sys.block_apply(&x).unwrap();
        let q: f64 = ax.iter().zip(&x).map(|(p, q)| p * q).sum();
        assert!((q - 2.0 * 0.09).abs() < 1e-15);
    }

    #[test]
    fn block_apply_matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in 1..=8 {
            let sys = build_stokes(s, 1.0, 2.0).unwrap();
            let dense = sys.to_dense().unwrap();
            let x: Vec<f64> = (0..sys.order()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = sys.block_apply(&x).unwrap();
            let yd = dense.matvec(&x).unwrap();
            let scale = yd.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(y
                .iter()
                .zip(&yd)
                .all(|(p, q)| (p - q).abs() <= 1e-13 * scale));
        }
    }

    #[test]
    fn stokes_a_is_spd() {
        for s in [2, 5, 8] {
            let sys = build_stokes(s, 1.0, 2.0).unwrap();
            assert!(sys.a().is_symmetric());
            let lambda_min = crate::dense::eigvals(&sys.a().to_dense())
                .unwrap()
                .iter()
                .map(|z| z.re)
                .fold(f64::INFINITY, f64::min);
            assert!(lambda_min > 0.0);
        }
    }

    #[test]
    fn split_round_trip() {
        let sys = build_stokes(8, 1.0, 2.0).unwrap();
        let back = split_external(&sys.assemble(), sys.n(), sys.m()).unwrap();
        assert_eq!(back.a(), sys.a());
        assert_eq!(back.b(), sys.b());
        assert_eq!(back.c(), sys.c());
        assert_eq!(back.c_equals_kb(), Some(2.0));
    }

    #[test]
    fn split_sign_convention_and_errors() {
        let mut t = vec![
            (0, 0, 4.0),
            (1, 1, 4.0),
            (2, 2, 4.0),
            (0, 3, 1.0),
            (1, 4, 1.0),
        ];
        t.extend([(3, 0, -1.0), (4, 1, -1.0)]);
        let full = CsrMatrix::from_triplets(5, 5, &t).unwrap();
        let sys = split_external(&full, 3, 2).unwrap();
        assert_eq!(
            sys.c().to_dense().as_slice(),
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );

        t.push((4, 4, 1e-3));
        let bad = CsrMatrix::from_triplets(5, 5, &t).unwrap();
        assert!(matches!(
            split_external(&bad, 3, 2),
            Err(Error::InvalidStructure(_))
        ));
        assert!(split_external(&bad, 3, 3).is_err());
    }

    #[test]
    fn toy_alpha_est() {
        let est = toy().alpha_est(1e-4);
        assert!(est.converged());
        assert!((est.alpha - 0.5).abs() < 1e-12);
    }

    #[test]
    fn assumptions() {
        let r = build_stokes(8, 1.0, 2.0).unwrap().check_assumptions();
        assert!(r.all_hold(), "{r:?}");

        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b.clone(), b, Some(1.0)).unwrap();
        assert!(!sys.check_assumptions().a_positive_definite);

        let a = CsrMatrix::identity(3);
        let b = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b.clone(), b, None).unwrap();
        let r = sys.check_assumptions();
        assert!(!r.rank_b_full && !r.rank_c_full && r.a_positive_definite);
    }

    #[test]
    fn constructor_checks() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(SaddleSystem::new(a.clone(), b.clone(), b.scale(3.0), Some(2.0)).is_err());
        assert!(SaddleSystem::new(a.clone(), b.clone(), b.scale(3.0), Some(3.0)).is_ok());
        assert!(
            SaddleSystem::new(a, CsrMatrix::identity(3), CsrMatrix::identity(3), None).is_err()
        );
    }
}
