//! Hermitian eigendecomposition and the functions built on it.
//!
//! The matrix is reduced to a Hermitian tridiagonal form with Householder
//! reflections, a diagonal unitary rotates the off-diagonal to be real and
//! non-negative, and the resulting real symmetric tridiagonal matrix is
//! diagonalized with implicit QL (the EISPACK `tql2` recurrence) while the
//! complex eigenvector basis is accumulated.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Per-eigenvalue QL sweep limit.
const MAX_QL_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianFactorization {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianFactorization {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `Q f(Λ) Q^H`, symmetrized.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let q = &self.eigenvectors;
        let n = q.rows();
        let scaled = ComplexMatrix::from_fn(n, n, |i, j| q[(i, j)] * f(self.eigenvalues[j]));
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += scaled[(i, k)] * q[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        for i in 0..n {
            out[(i, i)].im = 0.0;
            for j in 0..i {
                out[(i, j)] = out[(j, i)].conj();
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|l| l)
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is replaced by
/// `(H + H^H) / 2` before factorizing.
pub fn herm_eig(h: &ComplexMatrix) -> Result<HermitianFactorization> {
    if !h.is_square() {
        return Err(Error::shape("herm_eig", "square matrix", format!("{}x{}", h.rows(), h.cols())));
    }
    if !h.is_finite() {
        return Err(Error::Domain { function: "herm_eig", value: f64::NAN });
    }
    let n = h.rows();
    if n == 0 {
        return Ok(HermitianFactorization { eigenvalues: Vec::new(), eigenvectors: ComplexMatrix::zeros(0, 0) });
    }

    let mut a = h.hermitian_part();
    let mut z = ComplexMatrix::identity(n);
    tridiagonalize(&mut a, &mut z);

    let mut diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    // off[i] couples i-1 and i, off[0] unused
    let mut off = vec![0.0; n];
    let mut phase = Complex64::new(1.0, 0.0);
    for i in 1..n {
        let t = a[(i, i - 1)];
        let mag = t.norm();
        if mag > 0.0 {
            phase *= t / mag;
        }
        off[i] = mag;
        for r in 0..n {
            z[(r, i)] *= phase;
        }
    }

    tql2(&mut diag, &mut off, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| z[(r, order[c])]);
    Ok(HermitianFactorization { eigenvalues, eigenvectors })
}

/// Householder reduction `A <- Q^H A Q` to Hermitian tridiagonal form, with
/// the reflections accumulated into `q`.
fn tridiagonalize(a: &mut ComplexMatrix, q: &mut ComplexMatrix) {
    let n = a.rows();
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        let head = a[(k + 1, k)];
        let tail_sq: f64 = (k + 2..n).map(|i| a[(i, k)].norm_sqr()).sum();
        if tail_sq == 0.0 {
            continue;
        }
        let xnorm = (head.norm_sqr() + tail_sq).sqrt();
        let phase = if head.norm() > 0.0 { head / head.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;

        v.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        v[k + 1] = head - alpha;
        for i in k + 2..n {
            v[i] = a[(i, k)];
        }
        let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);

        // A <- A - 2 v w^H - 2 w v^H + 4 K v v^H, w = A v, K = v^H w
        for i in 0..n {
            w[i] = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum();
        }
        let kappa: f64 = (k + 1..n).map(|i| (v[i].conj() * w[i]).re).sum();
        for i in 0..n {
            for j in 0..n {
                let upd = v[i] * w[j].conj() * 2.0 + w[i] * v[j].conj() * 2.0 - v[i] * v[j].conj() * (4.0 * kappa);
                a[(i, j)] -= upd;
            }
        }
        // exact zeros below the subdiagonal in column/row k
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            a[(i, k)] = Complex64::new(0.0, 0.0);
            a[(k, i)] = Complex64::new(0.0, 0.0);
        }

        // Q <- Q (I - 2 v v^H)
        for r in 0..n {
            let qv: Complex64 = (k + 1..n).map(|j| q[(r, j)] * v[j]).sum();
            for j in k + 1..n {
                q[(r, j)] -= qv * v[j].conj() * 2.0;
            }
        }
    }
}

/// Implicit QL on a real symmetric tridiagonal matrix with diagonal `d` and
/// sub-diagonal `e[1..]`; rotations are applied to the columns of `z`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut ComplexMatrix) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence { iterations: iter });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zi1 = z[(k, i + 1)];
                        let zi = z[(k, i)];
                        z[(k, i + 1)] = zi * s + zi1 * c;
                        z[(k, i)] = zi * c - zi1 * s;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Largest absolute eigenvalue of a Hermitian matrix; for the PSD inputs
/// used by the step-size rules this is the largest eigenvalue.
pub fn spectral_norm(h: &ComplexMatrix) -> Result<f64> {
    let f = herm_eig(h)?;
    Ok(f.max_eigenvalue().max(-f.min_eigenvalue()))
}

/// Principal square root of a Hermitian positive definite matrix and its
/// inverse, returned as `(sqrt, inv_sqrt)`.
pub fn herm_sqrt(h: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let f = herm_eig(h)?;
    let min = f.min_eigenvalue();
    if min.is_nan() || min <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok((f.map_spectrum(f64::sqrt), f.map_spectrum(|l| 1.0 / l.sqrt())))
}

/// Solves `S H + H S = B + B^H` for Hermitian `H`, with `S` Hermitian
/// positive definite.
pub fn sylvester_spd(s: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !s.is_square() || s.shape() != b.shape() {
        return Err(Error::shape(
            "sylvester_spd",
            format!("two square {0}x{0} matrices", s.rows()),
            format!("{:?} and {:?}", s.shape(), b.shape()),
        ));
    }
    let f = herm_eig(s)?;
    let min = f.min_eigenvalue();
    if min.is_nan() || min <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let n = s.rows();
    let q = &f.eigenvectors;
    let rhs = b.try_add(&b.adjoint())?;
    let mut c = q.adjoint_mul(&rhs)?.matmul_unchecked(q);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] /= f.eigenvalues[i] + f.eigenvalues[j];
        }
    }
    Ok(q.matmul_unchecked(&c).matmul_unchecked(&q.adjoint()).hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real_diag(d: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(d)
    }

    #[test]
    fn identity_eigenvalues() {
        let f = herm_eig(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(f.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_case_keeps_basis_up_to_phase() {
        let f = herm_eig(&real_diag(&[5.0, 2.0])).unwrap();
        assert_eq!(f.eigenvalues, vec![2.0, 5.0]);
        assert!((f.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((f.eigenvectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_square_rejected() {
        let err = herm_eig(&ComplexMatrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        assert_eq!(spectral_norm(&ComplexMatrix::identity(4)).unwrap(), 1.0);
        assert_eq!(spectral_norm(&real_diag(&[0.1, 3.0, 2.0])).unwrap(), 3.0);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let (s, inv) = herm_sqrt(&real_diag(&[4.0, 9.0])).unwrap();
        assert!(s.distance(&real_diag(&[2.0, 3.0])) < 1e-15);
        assert!(inv.distance(&real_diag(&[0.5, 1.0 / 3.0])) < 1e-15);
        let (s, inv) = herm_sqrt(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(s, ComplexMatrix::identity(3));
        assert_eq!(inv, ComplexMatrix::identity(3));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let err = herm_sqrt(&real_diag(&[1.0, -2.0])).unwrap_err();
        assert_eq!(err, Error::NotPositiveDefinite { min_eigenvalue: -2.0 });
    }

    #[test]
    fn sylvester_identity_and_diagonal() {
        let b = ComplexMatrix::from_fn(2, 2, |i, j| Complex64::new(i as f64 + 1.0, j as f64 - 2.0));
        let h = sylvester_spd(&ComplexMatrix::identity(2), &b).unwrap();
        assert!(h.distance(&b.hermitian_part()) < 1e-15);

        // B + B^H = [[2,4],[4,6]]
        let b = ComplexMatrix::from_rows(&[
            vec![Complex64::new(1.0, 0.0), Complex64::new(4.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(3.0, 0.0)],
        ])
        .unwrap();
        let h = sylvester_spd(&real_diag(&[1.0, 3.0]), &b).unwrap();
        let ones = ComplexMatrix::from_fn(2, 2, |_, _| Complex64::new(1.0, 0.0));
        assert!(h.distance(&ones) < 1e-14);
    }

    #[test]
    fn sylvester_rejects_singular_s() {
        let b = ComplexMatrix::identity(2);
        assert!(matches!(sylvester_spd(&real_diag(&[0.0, 1.0]), &b), Err(Error::NotPositiveDefinite { .. })));
    }
}
