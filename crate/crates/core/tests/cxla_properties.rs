mod common;

use anc_core::cxla::{herm_eig, herm_sqrt, qr_positive, quadratic_form, spectral_norm, sylvester_spd, ComplexMatrix};
use common::oracles::power_iteration;
use common::{random_hermitian, random_matrix, random_pd, random_vector, rng};
use proptest::prelude::*;

fn unitarity_defect(q: &ComplexMatrix) -> f64 {
    (&q.adjoint() * q).distance(&ComplexMatrix::identity(q.cols()))
}

#[test]
fn random_hermitian_6x6_reconstructs() {
    let mut r = rng(6);
    for _ in 0..50 {
        let h = random_hermitian(&mut r, 6);
        let f = herm_eig(&h).unwrap();
        assert!(f.reconstruct().distance(&h) / h.frobenius_norm() <= 1e-10);
        assert!(unitarity_defect(&f.eigenvectors) <= 1e-10);
        assert!(f.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn larger_and_degenerate_spectra() {
    let mut r = rng(64);
    for n in [1, 2, 3, 12, 33, 64] {
        let h = random_hermitian(&mut r, n);
        let f = herm_eig(&h).unwrap();
        assert!(f.reconstruct().distance(&h) / h.frobenius_norm() <= 1e-10, "n={n}");
        assert!(unitarity_defect(&f.eigenvectors) <= 1e-10, "n={n}");
    }
    // repeated eigenvalues: U diag(1,1,1,4,4) U^H
    let (u, _) = qr_positive(&random_matrix(&mut r, 5, 5)).unwrap();
    let h = &(&u * &ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 1.0, 4.0, 4.0])) * &u.adjoint();
    let f = herm_eig(&h).unwrap();
    for (got, want) in f.eigenvalues.iter().zip([1.0, 1.0, 1.0, 4.0, 4.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!(f.reconstruct().distance(&h) < 1e-12);
}

#[test]
fn spectral_norm_matches_power_iteration() {
    let mut r = rng(11);
    for _ in 0..10 {
        let g = random_matrix(&mut r, 4, 12);
        let ghg = &g.adjoint() * &g;
        let fast = spectral_norm(&ghg).unwrap();
        let slow = power_iteration(&ghg, 5000);
        assert!(((fast - slow) / slow).abs() <= 1e-8, "{fast} vs {slow}");
    }
}

#[test]
fn spectral_norm_bounds_rayleigh_quotients() {
    let mut r = rng(12);
    let g = random_matrix(&mut r, 5, 8);
    let h = &g.adjoint() * &g;
    let norm = spectral_norm(&h).unwrap();
    for _ in 0..1000 {
        let v = random_vector(&mut r, 8);
        let q = quadratic_form(&h, &v).unwrap().re / anc_core::cxla::norm_sqr(&v);
        assert!(norm >= q * (1.0 - 1e-14));
    }
}

#[test]
fn qr_reconstructs_seeded_12x2() {
    let mut r = rng(122);
    for _ in 0..100 {
        let b = random_matrix(&mut r, 12, 2);
        let (q, rf) = qr_positive(&b).unwrap();
        assert!((&q * &rf).distance(&b) <= 1e-10 * b.frobenius_norm());
        assert!(unitarity_defect(&q) <= 1e-10);
        for k in 0..2 {
            assert!(rf[(k, k)].re > 0.0);
            assert_eq!(rf[(k, k)].im, 0.0);
        }
        assert_eq!(rf[(1, 0)], anc_core::Complex64::new(0.0, 0.0));
        // idempotent on its own Q factor
        let (q2, _) = qr_positive(&q).unwrap();
        assert!(q2.distance(&q) <= 1e-12);
    }
}

#[test]
fn sylvester_residual_on_seeded_pd() {
    let mut r = rng(15);
    for _ in 0..100 {
        let s = random_pd(&mut r, 2, 0.1);
        let b = random_matrix(&mut r, 2, 2);
        let h = sylvester_spd(&s, &b).unwrap();
        let rhs = &b + &b.adjoint();
        let lhs = &(&s * &h) + &(&h * &s);
        assert!(lhs.distance(&rhs) <= 1e-9 * rhs.frobenius_norm());
        assert_eq!(h.distance(&h.adjoint()), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), n in 1usize..10) {
        let mut r = rng(seed);
        let h = random_pd(&mut r, n, 0.5);
        let (s, inv) = herm_sqrt(&h).unwrap();
        let scale = h.frobenius_norm();
        prop_assert!((&s * &s).distance(&h) <= 1e-9 * scale);
        prop_assert!((&inv * &s).distance(&ComplexMatrix::identity(n)) <= 1e-9 * scale.max(1.0));
        let fh = herm_eig(&h).unwrap();
        let fs = herm_eig(&s).unwrap();
        prop_assert!(fs.min_eigenvalue() > 0.0);
        for (a, b) in fh.eigenvalues.iter().zip(&fs.eigenvalues) {
            prop_assert!((a.sqrt() - b).abs() <= 1e-10 * a.sqrt());
        }
    }

    #[test]
    fn eigen_reconstruction(seed in any::<u64>(), n in 1usize..16) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, n);
        let f = herm_eig(&h).unwrap();
        prop_assert!(f.reconstruct().distance(&h) <= 1e-10 * h.frobenius_norm());
        prop_assert!(unitarity_defect(&f.eigenvectors) <= 1e-10);
    }

    #[test]
    fn sylvester_solution_hermitian(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let s = random_pd(&mut r, n, 0.2);
        let b = random_matrix(&mut r, n, n);
        let h = sylvester_spd(&s, &b).unwrap();
        prop_assert_eq!(h.distance(&h.adjoint()), 0.0);
    }
}
