//! Nonsymmetric eigenvalues: balancing, Householder reduction to upper
//! Hessenberg form, then the Francis implicit double-shift QR iteration.

// index loops mirror the textbook sweeps
#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use super::DenseMatrix;
use crate::error::{Error, Result};

pub type ComplexList = Vec<Complex64>;

const RADIX: f64 = 2.0;

/// All eigenvalues of a square real matrix, conjugate pairs adjacent.
pub fn eigvals(a: &DenseMatrix) -> Result<ComplexList> {
    if !a.is_square() {
        return Err(Error::InvalidDimension(
            "eigvals needs a square matrix".into(),
        ));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix has non-finite entries".into(),
        ));
    }
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    balance(&mut h);
    hessenberg(&mut h);
    francis_qr(&mut h)
}

/// Diagonal similarity scaling by powers of two so that row and column
/// norms are comparable.
fn balance(a: &mut [Vec<f64>]) {
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                a[i].iter_mut().for_each(|v| *v *= g);
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

/// Householder similarity reduction to upper Hessenberg form.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let scale: f64 = (k + 1..n).map(|i| a[i][k].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut sigma = 0.0;
        for i in k + 1..n {
            v[i] = a[i][k] / scale;
            sigma += v[i] * v[i];
        }
        let alpha = -v[k + 1].signum() * sigma.sqrt();
        let alpha = if alpha == 0.0 { -sigma.sqrt() } else { alpha };
        v[k + 1] -= alpha;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // rows: A ← (I − βvvᵀ) A
        for j in 0..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * a[i][j]).sum::<f64>() * beta;
            if s != 0.0 {
                for i in k + 1..n {
                    a[i][j] -= s * v[i];
                }
            }
        }
        // columns: A ← A (I − βvvᵀ)
        for row in a.iter_mut() {
            let s: f64 = (k + 1..n).map(|j| row[j] * v[j]).sum::<f64>() * beta;
            if s != 0.0 {
                for j in k + 1..n {
                    row[j] -= s * v[j];
                }
            }
        }
        a[k + 1][k] = alpha * scale;
        for i in k + 2..n {
            a[i][k] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. The budget is
/// `30·n` sweeps in total.
fn francis_qr(a: &mut [Vec<f64>]) -> Result<ComplexList> {
    let n = a.len();
    let eps = f64::EPSILON;
    let max_sweeps = 30 * n;
    let mut sweeps = 0usize;
    let mut w = vec![Complex64::new(0.0, 0.0); n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // look for a negligible subdiagonal element
            let mut l = nu;
            while l > 0 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                w[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut ww = a[nu][nu - 1] * a[nu - 1][nu];
            if l + 1 == nu {
                let p = 0.5 * (y - x);
                let q = p * p + ww;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    w[nu - 1] = Complex64::new(x + z, 0.0);
                    w[nu] = if z != 0.0 {
                        Complex64::new(x - ww / z, 0.0)
                    } else {
                        Complex64::new(x + z, 0.0)
                    };
                } else {
                    w[nu - 1] = Complex64::new(x + p, z);
                    w[nu] = Complex64::new(x + p, -z);
                }
                nn -= 2;
                break;
            }

            if sweeps >= max_sweeps {
                return Err(Error::EigenNoConvergence { sweeps });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                ww = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;

            let (mut p, mut q, mut r, mut z);
            let mut m = nu - 2;
            loop {
                z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - ww) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[i + 2][i] = 0.0;
                if i != m {
                    a[i + 2][i - 1] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k + 1 != nu { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k + 1 != nu {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
            if l + 1 >= nu {
                break;
            }
        }
    }
    Ok(w)
}

/// Eigenvector of `a` for the approximate eigenvalue `lambda` by complex
/// inverse iteration. Returns the unit-norm vector and the residual
/// `‖Av − λv‖₂`.
pub fn inverse_iteration(a: &DenseMatrix, lambda: Complex64) -> Result<(Vec<Complex64>, f64)> {
    if !a.is_square() {
        return Err(Error::InvalidDimension(
            "inverse iteration needs a square matrix".into(),
        ));
    }
    let n = a.rows();
    let scale = a.frobenius_norm().max(1.0);
    // shifted slightly off the eigenvalue so the factorization stays regular
    let shift = lambda + Complex64::new(scale * 1e-13, scale * 1e-13);
    let mut m: Vec<Complex64> = a
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    for i in 0..n {
        m[i * n + i] -= shift;
    }
    let lu = ComplexLu::new(m, n, scale)?;

    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.1, 0.05 * (i % 3) as f64))
        .collect();
    normalize(&mut v);
    let mut residual = f64::INFINITY;
    for _ in 0..6 {
        v = lu.solve(&v);
        normalize(&mut v);
        residual = eigen_residual(a, lambda, &v);
        if residual <= 1e-13 * scale {
            break;
        }
    }
    Ok((v, residual))
}

fn normalize(v: &mut [Complex64]) {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|z| *z /= nrm);
    }
}

fn eigen_residual(a: &DenseMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    (0..a.rows())
        .map(|i| {
            let av: Complex64 = a.row(i).iter().zip(v).map(|(&x, z)| z * x).sum();
            (av - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

struct ComplexLu {
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    n: usize,
}

impl ComplexLu {
    fn new(mut lu: Vec<Complex64>, n: usize, scale: f64) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = f64::EPSILON * scale * 1e-3;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].norm().total_cmp(&lu[j * n + k].norm()))
                .unwrap();
            if p != k {
                for j in 0..n {
                    lu.swap(p * n + j, k * n + j);
                }
                perm.swap(p, k);
            }
            if lu[k * n + k].norm() == 0.0 {
                // exact singularity: perturb the pivot, inverse iteration tolerates it
                lu[k * n + k] = Complex64::new(tiny, 0.0);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    let v = lu[k * n + j];
                    lu[i * n + j] -= f * v;
                }
            }
        }
        Ok(Self { lu, perm, n })
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: ComplexList) -> ComplexList {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    /// Greedy nearest matching; fine for the well-separated test spectra.
    fn multiset_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let mut used = vec![false; b.len()];
        let mut worst: f64 = 0.0;
        for x in a {
            let (k, d) = b
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, y)| (k, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[k] = true;
            worst = worst.max(d);
        }
        worst
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        DenseMatrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn small_examples() {
        let e = eigvals(&DenseMatrix::from_rows(&[&[2.0]])).unwrap();
        assert_eq!(e, vec![Complex64::new(2.0, 0.0)]);

        let e = sorted(eigvals(&DenseMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]])).unwrap());
        assert!((e[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((e[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);

        let e = eigvals(&DenseMatrix::from_rows(&[&[-0.5, -0.5], &[0.5, 0.5]])).unwrap();
        assert!(e.iter().all(|z| z.norm() < 1e-7), "{e:?}");
    }

    #[test]
    fn trace_determinant_and_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8 {
            for _ in 0..10 {
                let a = random_matrix(&mut rng, n);
                let e = eigvals(&a).unwrap();
                let sum: Complex64 = e.iter().sum();
                let prod: Complex64 = e.iter().product();
                let fro = a.frobenius_norm();
                assert!((sum.re - a.trace()).abs() <= 1e-8 * fro && sum.im.abs() <= 1e-8 * fro);
                let det = a.lu().unwrap().determinant();
                assert!(
                    (prod - Complex64::new(det, 0.0)).norm() <= 1e-8 * fro.powi(n as i32).max(1.0)
                );
                let et = eigvals(&a.transpose()).unwrap();
                assert!(multiset_gap(&e, &et) < 1e-8);
            }
        }
    }

    #[test]
    fn eigenpair_backward_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 30);
        let fro = a.frobenius_norm();
        for lambda in eigvals(&a).unwrap() {
            let (_, res) = inverse_iteration(&a, lambda).unwrap();
            assert!(res <= 1e-8 * fro, "residual {res} for {lambda}");
        }
    }

    #[test]
    fn conjugate_pairs_for_real_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_matrix(&mut rng, 25);
        let e = eigvals(&a).unwrap();
        let conj: Vec<_> = e.iter().map(|z| z.conj()).collect();
        assert!(multiset_gap(&e, &conj) < 1e-10);
    }

    #[test]
    fn badly_scaled_matrix() {
        // similarity transform of diag(1,2,3) by diag(1, 1e6, 1e-6)
        let d = [1.0, 1e6, 1e-6];
        let base = DenseMatrix::from_rows(&[&[1.0, 1.0, 0.5], &[0.0, 2.0, 1.0], &[0.0, 0.0, 3.0]]);
        let mut a = base.clone();
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = d[i] * base[(i, j)] / d[j];
            }
        }
        let e = sorted(eigvals(&a).unwrap());
        for (z, want) in e.iter().zip([1.0, 2.0, 3.0]) {
            assert!((z.re - want).abs() < 1e-9 && z.im.abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(eigvals(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
