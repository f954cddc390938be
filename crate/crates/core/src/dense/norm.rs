//! Power-iteration estimate of the spectral norm.

use crate::operator::{vec_ops, TransposeOperator};

pub const NORM_TOL_DEFAULT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norm2Estimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Estimates `‖op‖₂` by power iteration on `opᵀop`.
///
/// Stops once two successive estimates differ by at most `tol` relative.
/// When `maxit` runs out the best estimate is returned with
/// `converged == false`.
pub fn norm2_est(op: &dyn TransposeOperator, tol: f64, maxit: usize) -> Norm2Estimate {
    let n = op.ncols();
    if n == 0 || op.nrows() == 0 {
        return Norm2Estimate {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    // fixed, non-symmetric start so no structured eigenvector is missed
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0)
        .collect();
    let nrm = vec_ops::norm2(&v);
    vec_ops::scale(1.0 / nrm, &mut v);

    let mut w = vec![0.0; op.nrows()];
    let mut u = vec![0.0; n];
    let mut estimate = 0.0f64;
    for it in 1..=maxit {
        op.apply(&v, &mut w);
        op.apply_transpose(&w, &mut u);
        let lambda = vec_ops::norm2(&u);
        if lambda == 0.0 {
            return Norm2Estimate {
                value: 0.0,
                converged: true,
                iterations: it,
            };
        }
        let next = lambda.sqrt();
        let change = (next - estimate).abs() / next;
        estimate = next;
        v.copy_from_slice(&u);
        vec_ops::scale(1.0 / lambda, &mut v);
        if it > 1 && change <= tol {
            return Norm2Estimate {
                value: estimate,
                converged: true,
                iterations: it,
            };
        }
    }
    Norm2Estimate {
        value: estimate,
        converged: false,
        iterations: maxit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::operator::{Diagonal, Identity};

    #[test]
    fn examples() {
        let e = norm2_est(&Identity(5), NORM_TOL_DEFAULT, 100);
        assert!(e.converged);
        assert!((e.value - 1.0).abs() < 1e-12);

        let e = norm2_est(&Diagonal(vec![3.0, 4.0]), 1e-10, 1000);
        assert!(e.converged);
        assert!((e.value - 4.0).abs() < 1e-8);
    }

    #[test]
    fn rectangular_operator() {
        // singular values of [[1,0],[0,2],[0,0]] are 2 and 1
        let a = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0], &[0.0, 0.0]]);
        let e = norm2_est(&a, 1e-12, 1000);
        assert!((e.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let e = norm2_est(&Diagonal(vec![1.0, 0.999999]), 1e-15, 3);
        assert!(!e.converged);
        assert_eq!(e.iterations, 3);
        assert!(e.value > 0.99);
    }
}
