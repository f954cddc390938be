//! Root-location tests for quadratics `x² − a·x + b = 0`.
//!
//! Both predicates take the coefficients in that sign convention. A caller
//! holding `λ² + φλ + ψ = 0` must pass `−φ`.

use num_complex::Complex64;

/// True iff both roots of `x² − a·x + b` (real `a`, `b`) lie strictly
/// inside the unit disk.
pub fn roots_in_unit_disk_real(a: f64, b: f64) -> bool {
    b.abs() < 1.0 && a.abs() < 1.0 + b
}

/// True iff both roots of `x² − φ·x + ψ` (complex `φ`, `ψ`) lie strictly
/// inside the unit disk.
pub fn roots_in_unit_disk_complex(phi: Complex64, psi: Complex64) -> bool {
    psi.norm() < 1.0 && (phi - phi.conj() * psi).norm() + psi.norm_sqr() < 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Roots of x² − φx + ψ by the quadratic formula.
    fn roots(phi: Complex64, psi: Complex64) -> [Complex64; 2] {
        let disc = (phi * phi - 4.0 * psi).sqrt();
        [(phi + disc) / 2.0, (phi - disc) / 2.0]
    }

    /// Oracle verdict, or `None` when a root sits within 1e-12 of the circle.
    fn oracle(phi: Complex64, psi: Complex64) -> Option<bool> {
        let r = roots(phi, psi);
        if r.iter().any(|z| (z.norm() - 1.0).abs() <= 1e-12) {
            return None;
        }
        Some(r.iter().all(|z| z.norm() < 1.0))
    }

    #[test]
    fn real_examples() {
        assert!(roots_in_unit_disk_real(0.0, 0.0));
        assert!(!roots_in_unit_disk_real(2.0, 1.0));
        assert!(roots_in_unit_disk_real(0.0, 0.25));
        let r = roots(Complex64::new(0.0, 0.0), Complex64::new(0.25, 0.0));
        assert!(r.iter().all(|z| (z.norm() - 0.5).abs() < 1e-15));
    }

    #[test]
    fn complex_examples() {
        let c = |re, im| Complex64::new(re, im);
        assert!(roots_in_unit_disk_complex(c(0.0, 0.0), c(0.0, 0.0)));
        assert!(!roots_in_unit_disk_complex(c(2.0, 0.0), c(1.0, 0.0)));
        let (phi, psi) = (c(0.1, 0.1), c(0.2, 0.0));
        assert_eq!(Some(roots_in_unit_disk_complex(phi, psi)), oracle(phi, psi));
        assert_eq!(oracle(phi, psi), Some(true));
    }

    #[test]
    fn real_agrees_with_root_moduli() {
        let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(500));
        runner
            .run(&(-3.0..3.0f64, -3.0..3.0f64), |(a, b)| {
                let (phi, psi) = (Complex64::new(a, 0.0), Complex64::new(b, 0.0));
                if let Some(want) = oracle(phi, psi) {
                    prop_assert_eq!(roots_in_unit_disk_real(a, b), want);
                }
                Ok(())
            })
            .unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn complex_agrees_with_root_moduli(
            pr in -2.0..2.0f64, pi in -2.0..2.0f64, sr in -1.5..1.5f64, si in -1.5..1.5f64
        ) {
            let (phi, psi) = (Complex64::new(pr, pi), Complex64::new(sr, si));
            if let Some(want) = oracle(phi, psi) {
                prop_assert_eq!(roots_in_unit_disk_complex(phi, psi), want);
            }
        }

        #[test]
        fn complex_reduces_to_real(a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let (phi, psi) = (Complex64::new(a, 0.0), Complex64::new(b, 0.0));
            if oracle(phi, psi).is_some() {
                prop_assert_eq!(roots_in_unit_disk_complex(phi, psi), roots_in_unit_disk_real(a, b));
            }
        }
    }
}
