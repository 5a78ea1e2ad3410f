#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use unrolldiff::{Matrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_shape_simple_fn((r, c), || rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_shape_simple_fn(n, || rng.sample(StandardNormal))
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn to_na_vec(v: &Vector) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().copied())
}

pub fn from_na_vec(v: &DVector<f64>) -> Vector {
    v.iter().copied().collect()
}

/// Spectral radius from a full complex eigendecomposition.
pub fn oracle_radius(m: &Matrix) -> f64 {
    to_na(m).complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn oracle_norm2(m: &Matrix) -> f64 {
    to_na(m).singular_values().max()
}

pub fn norm(v: &Vector) -> f64 {
    v.dot(v).sqrt()
}

pub fn rel_err(a: &Vector, b: &Vector) -> f64 {
    norm(&(a - b)) / (1.0 + norm(b))
}
