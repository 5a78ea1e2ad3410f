//! Dense kernels: norms, spectral estimates and linear solves.
//!
//! Everything here works on plain `ndarray` owned arrays. Inputs are checked
//! for NaN/Inf up front so that downstream failures are deterministic.

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vector = Array1<f64>;
pub type Matrix = Array2<f64>;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Pivots smaller than this fraction of the largest pivot count as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

const POWER_SEED: u64 = 0x005e_ed0f_9a3e;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub radius: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

pub fn norm(v: &ArrayView1<f64>) -> f64 {
    v.dot(v).sqrt()
}

pub fn norm_of(v: &Vector) -> f64 {
    norm(&v.view())
}

/// `mᵀ v`, accumulated over the contiguous rows of `m`.
pub fn mat_t_vec(m: &Matrix, v: &Vector) -> Vector {
    debug_assert_eq!(m.nrows(), v.len());
    let mut out = Vector::zeros(m.ncols());
    for (row, vi) in m.rows().into_iter().zip(v) {
        out.scaled_add(*vi, &row);
    }
    out
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn ensure_finite_vec(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_finite_mat(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(m: &Matrix, what: &str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c || r == 0 {
        return Err(Error::Dimension(format!("{what}: expected non-empty square matrix, got {r}x{c}")));
    }
    Ok(r)
}

fn seeded_unit_vector(n: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Vector = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm_of(&v);
    v /= nv;
    v
}

/// Largest eigenvalue magnitude of a real 2x2 matrix `[[a, b], [c, d]]`.
pub fn eig2_max_modulus(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        (half_tr + root).abs().max((half_tr - root).abs())
    } else {
        det.abs().sqrt()
    }
}

/// Estimates `ρ(m)` by power iteration from a fixed seeded start.
///
/// Each step checks two certificates: the residual of the current Rayleigh
/// pair, and the residual of a Rayleigh–Ritz projection onto the two-step
/// Krylov space `span(v, m v)`. The second one captures dominant complex
/// conjugate pairs and real `±λ` pairs, for which the single-vector estimate
/// oscillates. Convergence is declared once either residual drops below
/// `tol · ‖m‖_F`; the Ritz value must also repeat on the following step.
///
/// Without convergence the reported radius is the mean log growth
/// `‖m v_k‖` over the second half of the run. Rayleigh and Ritz values of a
/// non-normal matrix can overshoot `ρ` arbitrarily; the growth rate cannot
/// in the limit.
pub fn spectral_radius(m: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralReport> {
    let n = ensure_square(m, "spectral_radius")?;
    ensure_finite_mat(m, "spectral_radius input")?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Parameter("power iteration needs at least one step".into()));
    }
    let scale = frobenius(m);
    if scale == 0.0 {
        return Ok(SpectralReport { radius: 0.0, iterations_used: 0, converged: true });
    }
    let threshold = tol * scale;
    let mut v = seeded_unit_vector(n);
    let mut prev_ritz: Option<f64> = None;
    let burn_in = max_iter / 2;
    let mut log_growth = 0.0;

    for it in 1..=max_iter {
        let w = m.dot(&v);
        let nw = norm_of(&w);
        if nw == 0.0 {
            return Ok(SpectralReport { radius: 0.0, iterations_used: it, converged: true });
        }
        let theta = v.dot(&w);
        let mut r = &w - &(theta * &v);
        let r1 = norm_of(&r);
        if r1 <= threshold {
            return Ok(SpectralReport { radius: theta.abs(), iterations_used: it, converged: true });
        }
        if it > burn_in {
            log_growth += nw.ln();
        }

        if n > 1 {
            // re-orthogonalize once; r is tiny relative to w near convergence
            let c = v.dot(&r);
            r.scaled_add(-c, &v);
            let nr = norm_of(&r);
            if nr > 0.0 {
                let q2 = r / nr;
                let aq2 = m.dot(&q2);
                let h11 = v.dot(&w);
                let h12 = v.dot(&aq2);
                let h21 = q2.dot(&w);
                let h22 = q2.dot(&aq2);
                let mut res1 = w.clone();
                res1.scaled_add(-h11, &v);
                res1.scaled_add(-h21, &q2);
                let mut res2 = aq2;
                res2.scaled_add(-h12, &v);
                res2.scaled_add(-h22, &q2);
                let res = (res1.dot(&res1) + res2.dot(&res2)).sqrt();
                let ritz = eig2_max_modulus(h11, h12, h21, h22);
                // Defective blocks perturb 2x2 Ritz values by O(√ε), so the
                // certificate must also be stable across two consecutive steps.
                if res <= threshold {
                    if prev_ritz.is_some_and(|p| (p - ritz).abs() <= threshold) {
                        return Ok(SpectralReport { radius: ritz, iterations_used: it, converged: true });
                    }
                    prev_ritz = Some(ritz);
                } else {
                    prev_ritz = None;
                }
            }
        }
        v = w / nw;
    }
    let averaged = (log_growth / (max_iter - burn_in) as f64).exp();
    Ok(SpectralReport { radius: averaged, iterations_used: max_iter, converged: false })
}

/// Largest singular value, by power iteration on the smaller Gram matrix.
pub fn operator_norm_2(m: &Matrix) -> Result<f64> {
    ensure_finite_mat(m, "operator_norm_2 input")?;
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return Ok(0.0);
    }
    let gram = if r >= c { m.t().dot(m) } else { m.dot(&m.t()) };
    let n = gram.nrows();
    let mut v = seeded_unit_vector(n);
    let mut theta = 0.0;
    for _ in 0..DEFAULT_MAX_ITER {
        let w = gram.dot(&v);
        let nw = norm_of(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        theta = v.dot(&w);
        let res = norm_of(&(&w - &(theta * &v)));
        v = w / nw;
        if res <= DEFAULT_TOL * theta.abs() {
            break;
        }
    }
    Ok(theta.max(0.0).sqrt())
}

/// Solves `m x = rhs` by LU with partial pivoting plus one refinement step.
pub fn solve_linear(m: &Matrix, rhs: &Vector) -> Result<Vector> {
    let n = ensure_square(m, "solve_linear")?;
    if rhs.len() != n {
        return Err(Error::Dimension(format!("solve_linear: rhs has length {}, matrix is {n}x{n}", rhs.len())));
    }
    ensure_finite_mat(m, "solve_linear matrix")?;
    ensure_finite_vec(rhs, "solve_linear rhs")?;

    let lu = LuFactors::new(m)?;
    let mut x = lu.solve(rhs);
    let residual = rhs - &m.dot(&x);
    x += &lu.solve(&residual);
    Ok(x)
}

struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactors {
    fn new(m: &Matrix) -> Result<Self> {
        let n = m.nrows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut max_pivot: f64 = 0.0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pivot) =
                (k..n).map(|i| (i, lu[[i, k]].abs())).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pivot == 0.0 {
                return Err(Error::Singular { pivot: 0.0 });
            }
            max_pivot = max_pivot.max(pivot);
            min_pivot = min_pivot.min(pivot);
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    lu.swap([p, j], [k, j]);
                }
            }
            let d = lu[[k, k]];
            for i in (k + 1)..n {
                let f = lu[[i, k]] / d;
                lu[[i, k]] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[[i, j]] -= f * lu[[k, j]];
                    }
                }
            }
        }
        if min_pivot < SINGULAR_PIVOT_RATIO * max_pivot {
            return Err(Error::Singular { pivot: min_pivot });
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, rhs: &Vector) -> Vector {
        let n = self.lu.nrows();
        let mut y: Vector = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[[i, j]] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.lu[[i, j]] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[[i, i]];
        }
        y
    }
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let n = ensure_square(m, "symmetric_eigenvalues")?;
    ensure_finite_mat(m, "symmetric_eigenvalues input")?;
    let mut a = m.clone();
    // symmetrize against round-off in callers that build A^T A by hand
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = avg;
            a[[j, i]] = avg;
        }
    }
    let total = frobenius(&a);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    Ok(eig)
}

/// Principal submatrix on the given index set.
pub fn principal_submatrix(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_shape_fn((idx.len(), idx.len()), |(i, j)| m[[idx[i], idx[j]]])
}

/// Columns of `m` on the given index set.
pub fn select_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros((m.nrows(), idx.len()));
    for (k, &j) in idx.iter().enumerate() {
        out.slice_mut(s![.., k]).assign(&m.slice(s![.., j]));
    }
    out
}
