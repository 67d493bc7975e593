//! Reference implementations used only by tests. None of these share code
//! paths with the library: Bessel values come from power series and Miller's
//! backward recurrence, linear solves from Gaussian elimination, spectral
//! norms from power iteration.

#![allow(dead_code)]

use anc_core::cxla::ComplexMatrix;
use anc_core::Complex64;

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Series and recurrence regimes switch here.
pub const SERIES_LIMIT: f64 = 18.0;

/// Neumaier compensated summation.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// J0 by its power series `sum (-1)^k (x^2/4)^k / (k!)^2`.
pub fn j0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut acc = KahanSum::default();
    let mut term = 1.0;
    acc.add(term);
    for k in 1..400 {
        term *= -q / (k as f64 * k as f64);
        acc.add(term);
        if term.abs() < 1e-300 || (term.abs() < 1e-20 * acc.value().abs().max(1e-300) && k as f64 > q.sqrt()) {
            break;
        }
    }
    acc.value()
}

/// Y0 from its series in terms of harmonic numbers.
pub fn y0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut acc = KahanSum::default();
    let mut term = 1.0;
    let mut harmonic = 0.0;
    for k in 1..400 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        acc.add(-term * harmonic);
        if term.abs() * harmonic < 1e-300 || (term.abs() < 1e-20 && kf > q.sqrt()) {
            break;
        }
    }
    std::f64::consts::FRAC_2_PI * (((x / 2.0).ln() + EULER_GAMMA) * j0_series(x) + acc.value())
}

/// `J_0 .. J_{n}` by Miller's backward recurrence normalized with
/// `J0 + 2 sum J_{2k} = 1`.
fn miller_even_orders(x: f64) -> Vec<f64> {
    let start = (x + 60.0 + 10.0 * x.cbrt()) as usize | 1;
    let start = start + 1;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for n in (1..=start).rev() {
        vals[n - 1] = 2.0 * n as f64 / x * vals[n] - vals[n + 1];
        if vals[n - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(n - 1) {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = KahanSum::default();
    norm.add(vals[0]);
    for k in (2..=start).step_by(2) {
        norm.add(2.0 * vals[k]);
    }
    let norm = norm.value();
    vals.iter().map(|v| v / norm).collect()
}

pub fn j0_miller(x: f64) -> f64 {
    miller_even_orders(x)[0]
}

/// Y0 from the Neumann series `(2/pi)[(ln(x/2)+gamma) J0 - 2 sum (-1)^k J_2k / k]`.
pub fn y0_neumann(x: f64) -> f64 {
    let j = miller_even_orders(x);
    let mut acc = KahanSum::default();
    let mut k = 1;
    while 2 * k < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * j[2 * k] / k as f64);
        k += 1;
    }
    std::f64::consts::FRAC_2_PI * (((x / 2.0).ln() + EULER_GAMMA) * j[0] - 2.0 * acc.value())
}

pub fn j0_oracle(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_miller(x)
    }
}

pub fn y0_oracle(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        y0_series(x)
    } else {
        y0_neumann(x)
    }
}

/// Spherical j0 by `sum (-1)^k x^{2k} / (2k+1)!` for small x and by composite
/// Simpson quadrature of `int_0^1 cos(x t) dt` beyond.
pub fn sph_j0_oracle(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        let z = x * x;
        let mut acc = KahanSum::default();
        let mut term = 1.0;
        acc.add(term);
        for k in 1..200 {
            let kf = k as f64;
            term *= -z / ((2.0 * kf) * (2.0 * kf + 1.0));
            acc.add(term);
            if term.abs() < 1e-22 {
                break;
            }
        }
        acc.value()
    } else {
        let n = 100_000usize;
        let h = 1.0 / n as f64;
        let mut acc = KahanSum::default();
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc.add(w * (x * i as f64 * h).cos());
        }
        acc.value() * h / 3.0
    }
}

/// `count` points log-spaced on `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Solves `M X = B` by Gaussian elimination with partial pivoting.
pub fn solve(m: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = m.rows();
    assert_eq!(n, m.cols());
    assert_eq!(n, b.rows());
    let k = b.cols();
    let mut a: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            let mut row: Vec<Complex64> = m.row(i).to_vec();
            row.extend_from_slice(b.row(i));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        assert!(p.norm() > 0.0, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f.norm() == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (dst, src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *dst -= f * src;
            }
        }
    }
    let mut x = vec![vec![Complex64::new(0.0, 0.0); k]; n];
    for row in (0..n).rev() {
        for c in 0..k {
            let mut acc = a[row][n + c];
            for j in row + 1..n {
                acc -= a[row][j] * x[j][c];
            }
            x[row][c] = acc / a[row][row];
        }
    }
    ComplexMatrix::from_rows(&x).unwrap()
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
pub fn power_iteration(h: &ComplexMatrix, iters: usize) -> f64 {
    let n = h.rows();
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.3 - 0.05 * i as f64)).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = h.mul_vec(&v).unwrap();
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let num: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        lambda = num.re / den;
        v = w.into_iter().map(|z| z / norm).collect();
    }
    lambda
}
