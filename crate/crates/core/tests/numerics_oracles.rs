mod common;

use common::*;
use ndarray::array;
use unrolldiff::linalg::{
    operator_norm_2, solve_linear, spectral_radius, symmetric_eigenvalues, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use unrolldiff::{Error, Matrix, Vector};

#[test]
fn spectral_radius_matches_eigendecomposition() {
    let mut r = rng(11);
    for _ in 0..100 {
        let m = gaussian_matrix(&mut r, 5, 5);
        let rep = spectral_radius(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let oracle = oracle_radius(&m);
        assert!((rep.radius - oracle).abs() <= 1e-8, "{} vs {oracle}", rep.radius);
    }
}

#[test]
fn spectral_radius_on_structured_spectra() {
    // dominant complex pair
    let (c, s) = (std::f64::consts::FRAC_PI_3.cos(), std::f64::consts::FRAC_PI_3.sin());
    let m = array![[0.9 * c, -0.9 * s, 0.0], [0.9 * s, 0.9 * c, 0.0], [0.0, 0.0, 0.3]];
    assert!((spectral_radius(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().radius - 0.9).abs() < 1e-10);
    // ±λ pair
    let m = array![[0.0, 0.7], [0.7, 0.0]];
    assert!((spectral_radius(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().radius - 0.7).abs() < 1e-12);
    // nilpotent 3×3
    let m = array![[0.0, 1.0, 2.0], [0.0, 0.0, 3.0], [0.0, 0.0, 0.0]];
    assert_eq!(spectral_radius(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().radius, 0.0);
}

#[test]
fn symmetric_eigenvalues_match_oracle() {
    let mut r = rng(12);
    for n in [1, 2, 5, 17, 40] {
        let g = gaussian_matrix(&mut r, n, n);
        let s = &g + &g.t();
        let ours = symmetric_eigenvalues(&s).unwrap();
        let mut oracle: Vec<f64> = to_na(&s).symmetric_eigenvalues().iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn operator_norm_matches_svd() {
    let mut r = rng(13);
    for (rows, cols) in [(5, 5), (8, 3), (3, 8), (80, 200)] {
        let m = gaussian_matrix(&mut r, rows, cols);
        let ours = operator_norm_2(&m).unwrap();
        let oracle = oracle_norm2(&m);
        assert!((ours - oracle).abs() <= 1e-8 * oracle, "{ours} vs {oracle}");
    }
}

#[test]
fn solve_linear_matches_lu_oracle() {
    let mut r = rng(14);
    for n in [1, 3, 8, 30] {
        let m = gaussian_matrix(&mut r, n, n);
        let b = gaussian_vector(&mut r, n);
        let x = solve_linear(&m, &b).unwrap();
        let oracle = from_na_vec(&to_na(&m).lu().solve(&to_na_vec(&b)).unwrap());
        assert!(rel_err(&x, &oracle) < 1e-9);
        let resid = norm(&(m.dot(&x) - &b));
        assert!(resid <= 1e-10 * (1.0 + norm(&b)));
    }
}

#[test]
fn seeded_eight_by_eight_residual() {
    let mut r = rng(8);
    let m = gaussian_matrix(&mut r, 8, 8);
    let b = gaussian_vector(&mut r, 8);
    let x = solve_linear(&m, &b).unwrap();
    assert!(norm(&(m.dot(&x) - &b)) <= 1e-10 * (1.0 + norm(&b)));
}

#[test]
fn singular_systems_report_pivot() {
    let m = array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]];
    match solve_linear(&m, &Vector::ones(3)) {
        Err(Error::Singular { pivot }) => assert!(pivot.abs() < 1e-10),
        other => panic!("expected singular error, got {other:?}"),
    }
    assert!(matches!(solve_linear(&Matrix::zeros((2, 2)), &Vector::ones(2)), Err(Error::Singular { .. })));
}
