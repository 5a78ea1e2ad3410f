//! Time-varying linear recursions `e_{k+1} = B_k e_k + C_k e_k + d_k` and
//! log-linear rate fitting.
//!
//! Sequences are passed as index callbacks so that long horizons do not need
//! to be materialised.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite_vec, norm_of, solve_linear, spectral_radius, Matrix, SpectralReport, Vector, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};

pub type MatrixSeq<'a> = Box<dyn Fn(usize) -> Matrix + Send + Sync + 'a>;
pub type VectorSeq<'a> = Box<dyn Fn(usize) -> Vector + Send + Sync + 'a>;

pub const DEFAULT_TAIL_FRACTION: f64 = 0.3;
pub const MIN_FIT_POINTS: usize = 5;

pub struct RecursionSpec<'a> {
    pub b: MatrixSeq<'a>,
    pub c: MatrixSeq<'a>,
    pub d: VectorSeq<'a>,
    pub e0: Vector,
    pub horizon: usize,
}

impl<'a> RecursionSpec<'a> {
    pub fn new(b: MatrixSeq<'a>, c: MatrixSeq<'a>, d: VectorSeq<'a>, e0: Vector, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Parameter("recursion horizon must be at least 1".into()));
        }
        if e0.is_empty() {
            return Err(Error::Dimension("initial vector must be non-empty".into()));
        }
        ensure_finite_vec(&e0, "recursion initial vector")?;
        Ok(Self { b, c, d, e0, horizon })
    }

    pub fn dim(&self) -> usize {
        self.e0.len()
    }
}

fn check_square(m: &Matrix, n: usize, name: &str, k: usize) -> Result<()> {
    if m.dim() != (n, n) {
        let (r, c) = m.dim();
        return Err(Error::Dimension(format!("{name}_{k} is {r}x{c}, expected {n}x{n}")));
    }
    Ok(())
}

fn check_len(v: &Vector, n: usize, name: &str, k: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("{name}_{k} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

/// Returns `e_0, …, e_horizon`.
pub fn run_recursion(spec: &RecursionSpec<'_>) -> Result<Vec<Vector>> {
    let n = spec.dim();
    let mut trace = Vec::with_capacity(spec.horizon + 1);
    trace.push(spec.e0.clone());
    for k in 0..spec.horizon {
        let b = (spec.b)(k);
        let c = (spec.c)(k);
        let d = (spec.d)(k);
        check_square(&b, n, "B", k)?;
        check_square(&c, n, "C", k)?;
        check_len(&d, n, "d", k)?;
        let e = &trace[k];
        let next = b.dot(e) + c.dot(e) + d;
        trace.push(next);
    }
    Ok(trace)
}

#[derive(Debug, Clone)]
pub struct AffineLimitRun {
    pub trace: Vec<Vector>,
    /// `(I − B)^{-1} b` for the limiting pair.
    pub limit: Vector,
    pub limit_radius: SpectralReport,
}

/// Runs `x_{k+1} = B_k x_k + b_k` and returns the closed-form limit
/// `(I − B)^{-1} b` of the limiting pair alongside the trace.
pub fn run_affine_limit(
    b_seq: &dyn Fn(usize) -> Matrix,
    b_limit: &Matrix,
    rhs_seq: &dyn Fn(usize) -> Vector,
    rhs_limit: &Vector,
    x0: &Vector,
    horizon: usize,
) -> Result<AffineLimitRun> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::Dimension("initial vector must be non-empty".into()));
    }
    check_square(b_limit, n, "B", usize::MAX)?;
    check_len(rhs_limit, n, "b", usize::MAX)?;
    let limit_radius = spectral_radius(b_limit, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    if limit_radius.radius >= 1.0 {
        return Err(Error::Contraction { radius: limit_radius.radius, context: "limit of B_k".into() });
    }
    let system = Matrix::eye(n) - b_limit;
    let limit = solve_linear(&system, rhs_limit)?;

    let mut trace = Vec::with_capacity(horizon + 1);
    trace.push(x0.clone());
    for k in 0..horizon {
        let bk = b_seq(k);
        let rk = rhs_seq(k);
        check_square(&bk, n, "B", k)?;
        check_len(&rk, n, "b", k)?;
        let next = bk.dot(&trace[k]) + rk;
        trace.push(next);
    }
    Ok(AffineLimitRun { trace, limit, limit_radius })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateEstimate {
    /// Fitted per-iteration contraction factor `q`.
    pub rate: f64,
    /// Fitted constant `c` in `error_k ≈ c q^k`.
    pub intercept: f64,
    /// Half-open index range `[start, end)` used in the fit.
    pub window: (usize, usize),
    /// RMS residual of the fit in log space.
    pub residual: f64,
}

/// Fits `log e_k = log c + k log q` over the final `tail_fraction` of the
/// curve, with the saturation floor set at `1e2 · ε · e_0`.
pub fn estimate_rate(errors: &[f64], tail_fraction: f64) -> Result<RateEstimate> {
    let floor = errors.first().map(|e0| 1e2 * f64::EPSILON * e0.abs()).unwrap_or(0.0);
    estimate_rate_above(errors, tail_fraction, floor)
}

/// Like [`estimate_rate`] with an explicit saturation floor.
///
/// The curve is cut at the first entry that is not strictly above `floor`;
/// everything after it is treated as round-off and ignored.
pub fn estimate_rate_above(errors: &[f64], tail_fraction: f64, floor: f64) -> Result<RateEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Parameter(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let floor = floor.max(0.0);
    let usable = errors.iter().position(|&e| !(e > floor) || !e.is_finite()).unwrap_or(errors.len());
    if usable < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { usable, needed: MIN_FIT_POINTS });
    }
    let len = ((tail_fraction * usable as f64).ceil() as usize).clamp(MIN_FIT_POINTS, usable);
    let start = usable - len;

    let xs: Vec<f64> = (start..usable).map(|k| k as f64).collect();
    let ys: Vec<f64> = errors[start..usable].iter().map(|e| e.ln()).collect();
    let nf = len as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (icpt + slope * x);
            r * r
        })
        .sum::<f64>()
        / nf)
        .sqrt();

    Ok(RateEstimate { rate: slope.exp().min(1.0), intercept: icpt.exp(), window: (start, usable), residual })
}

pub fn error_norms(trace: &[Vector]) -> Vec<f64> {
    trace.iter().map(norm_of).collect()
}

/// Writes a `k,error_norm` table.
pub fn write_error_csv<W: Write>(mut out: W, errors: &[f64]) -> Result<()> {
    writeln!(out, "k,error_norm")?;
    for (k, e) in errors.iter().enumerate() {
        writeln!(out, "{k},{e:e}")?;
    }
    Ok(())
}
