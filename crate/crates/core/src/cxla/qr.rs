use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Relative threshold on `|R[k,k]| / ||B||_F` below which a column is
/// considered dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin Householder QR, `B = Q R`, normalized so that `R` has a strictly
/// positive real diagonal. Requires `rows >= cols` and full column rank.
pub fn qr_positive(b: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (m, n) = b.shape();
    if m < n {
        return Err(Error::shape("qr_positive", "rows >= cols", format!("{m}x{n}")));
    }
    let scale = b.frobenius_norm();
    let threshold = RANK_TOLERANCE * scale;
    if n > 0 && !(scale > 0.0) {
        return Err(Error::RankDeficient { index: 0, magnitude: 0.0, threshold });
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut a = b.clone();
    let mut reflectors: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(n);
    for k in 0..n {
        let head = a[(k, k)];
        let norm = (k..m).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let phase = if head.norm() > 0.0 { head / head.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k..m).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);
        for j in k..n {
            let dot: Complex64 = (k..m).map(|i| v[i - k].conj() * a[(i, j)]).sum();
            for i in k..m {
                a[(i, j)] -= v[i - k] * dot * 2.0;
            }
        }
        a[(k, k)] = alpha;
        for i in k + 1..m {
            a[(i, k)] = zero;
        }
        reflectors.push(Some(v));
    }

    let mut r = ComplexMatrix::from_fn(n, n, |i, j| if j >= i { a[(i, j)] } else { zero });
    for k in 0..n {
        let mag = r[(k, k)].norm();
        if !(mag > threshold) {
            return Err(Error::RankDeficient { index: k, magnitude: mag, threshold });
        }
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I
    let mut q = ComplexMatrix::from_fn(m, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { zero });
    for (k, v) in reflectors.iter().enumerate().rev() {
        let Some(v) = v else { continue };
        for j in 0..n {
            let dot: Complex64 = (k..m).map(|i| v[i - k].conj() * q[(i, j)]).sum();
            if dot == zero {
                continue;
            }
            for i in k..m {
                q[(i, j)] -= v[i - k] * dot * 2.0;
            }
        }
    }

    // Move the diagonal phases of R into Q.
    for k in 0..n {
        let d = r[(k, k)];
        let phase = d / d.norm();
        for i in 0..m {
            q[(i, k)] *= phase;
        }
        let inv = phase.conj();
        for j in k..n {
            r[(k, j)] *= inv;
        }
        r[(k, k)] = Complex64::new(d.norm(), 0.0);
    }
    Ok((q, r))
}
