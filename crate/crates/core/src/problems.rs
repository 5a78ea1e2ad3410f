//! Parametric composite objectives `F(x, u) = f(x, u) + g(x, u)`.
//!
//! Three instances are provided:
//!
//! * `LogisticL2`: `f = (1/M) Σ log(1 + exp(−b_i a_iᵀ x))`, `g = λ/2 ‖x‖²`,
//!   parameters `u = (A, λ)`.
//! * `LassoL1`: `f = ½‖A x − b‖²`, `g = λ‖x‖₁`, parameters `u = (A, b, λ)`.
//! * `QuadToy`: `f = ½ xᵀ Q x − cᵀ x`, `g = 0`, parameters `u = (Q, c)`.
//!
//! Both regularizers have flat active manifolds, so the tangent projection at
//! a point is a constant diagonal 0/1 mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite_mat, ensure_finite_vec, mat_t_vec, norm_of, principal_submatrix, spectral_radius,
    symmetric_eigenvalues, Matrix, Vector, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

/// Relative strictness margin for the non-degeneracy check.
pub const ND_MARGIN: f64 = 1e-6;
/// Smallest restricted curvature accepted as positive definite.
pub const RPD_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LogisticL2,
    LassoL1,
    QuadToy,
}

/// The differentiation variable `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBundle {
    pub design: Matrix,
    pub target: Vector,
    pub reg: f64,
}

/// A direction `u̇` in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDirection {
    pub d_design: Matrix,
    pub d_target: Vector,
    pub d_reg: f64,
}

impl ParamDirection {
    pub fn zeros_like(bundle: &ParamBundle) -> Self {
        Self { d_design: Matrix::zeros(bundle.design.dim()), d_target: Vector::zeros(bundle.target.len()), d_reg: 0.0 }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { d_design: &self.d_design * c, d_target: &self.d_target * c, d_reg: self.d_reg * c }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            d_design: &self.d_design + &other.d_design,
            d_target: &self.d_target + &other.d_target,
            d_reg: self.d_reg + other.d_reg,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.d_reg == 0.0 && self.d_design.iter().all(|&x| x == 0.0) && self.d_target.iter().all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TangentMask {
    pub active: Vec<bool>,
}

impl TangentMask {
    pub fn full(n: usize) -> Self {
        Self { active: vec![true; n] }
    }

    pub fn support(&self) -> Vec<usize> {
        self.active.iter().enumerate().filter_map(|(i, &a)| a.then_some(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Restricted positive definiteness and non-degeneracy at a candidate solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub rpd: bool,
    /// Smallest eigenvalue of the restricted Hessian of `F`.
    pub rpd_margin: f64,
    pub nd: bool,
    /// `min_i (1 − |∇f_i| / λ)` over inactive coordinates; `1` when `g` is smooth.
    pub nd_margin: f64,
    pub support_size: usize,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.rpd && self.nd
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Problem {
    kind: ProblemKind,
    bundle: ParamBundle,
    lipschitz: f64,
    strong_convexity: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    // log(1 + e^t)
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn gram_radius(a: &Matrix) -> Result<f64> {
    let gram = if a.nrows() < a.ncols() { a.dot(&a.t()) } else { a.t().dot(a) };
    Ok(spectral_radius(&gram, DEFAULT_TOL, DEFAULT_MAX_ITER)?.radius)
}

impl Problem {
    pub fn new(kind: ProblemKind, bundle: ParamBundle) -> Result<Self> {
        ensure_finite_mat(&bundle.design, "design matrix")?;
        ensure_finite_vec(&bundle.target, "target vector")?;
        let (m, n) = bundle.design.dim();
        if m == 0 || n == 0 {
            return Err(Error::Dimension("design matrix must be non-empty".into()));
        }
        if !(bundle.reg > 0.0) || !bundle.reg.is_finite() {
            return Err(Error::Parameter(format!("regularization weight must be positive, got {}", bundle.reg)));
        }
        let (lipschitz, strong_convexity) = match kind {
            ProblemKind::LassoL1 => {
                if bundle.target.len() != m {
                    return Err(Error::Dimension(format!(
                        "target has length {}, design has {m} rows",
                        bundle.target.len()
                    )));
                }
                let l = gram_radius(&bundle.design)?;
                let mu = if m >= n {
                    symmetric_eigenvalues(&bundle.design.t().dot(&bundle.design))?[0].max(0.0)
                } else {
                    0.0
                };
                (l, mu)
            }
            ProblemKind::LogisticL2 => {
                if bundle.target.len() != m {
                    return Err(Error::Dimension(format!(
                        "labels have length {}, design has {m} rows",
                        bundle.target.len()
                    )));
                }
                if let Some(bad) = bundle.target.iter().find(|&&y| y != 1.0 && y != -1.0) {
                    return Err(Error::Parameter(format!("logistic labels must be ±1, found {bad}")));
                }
                // σ' ≤ 1/4 bounds the data-term curvature by ρ(AᵀA)/(4M)
                let l = gram_radius(&bundle.design)? / (4.0 * m as f64) + bundle.reg;
                (l, bundle.reg)
            }
            ProblemKind::QuadToy => {
                if m != n {
                    return Err(Error::Dimension(format!("quadratic form must be square, got {m}x{n}")));
                }
                if bundle.target.len() != n {
                    return Err(Error::Dimension(format!(
                        "linear term has length {}, expected {n}",
                        bundle.target.len()
                    )));
                }
                let q = &bundle.design;
                if (0..n).any(|i| (0..n).any(|j| q[[i, j]] != q[[j, i]])) {
                    return Err(Error::Parameter("quadratic form must be symmetric".into()));
                }
                let eig = symmetric_eigenvalues(q)?;
                (eig[n - 1].abs().max(eig[0].abs()), eig[0].max(0.0))
            }
        };
        Ok(Self { kind, bundle, lipschitz, strong_convexity })
    }

    pub fn lasso(design: Matrix, target: Vector, reg: f64) -> Result<Self> {
        Self::new(ProblemKind::LassoL1, ParamBundle { design, target, reg })
    }

    pub fn logistic(design: Matrix, labels: Vector, reg: f64) -> Result<Self> {
        Self::new(ProblemKind::LogisticL2, ParamBundle { design, target: labels, reg })
    }

    /// `f = ½ xᵀ Q x − cᵀ x` with no regularizer.
    pub fn quad(q: Matrix, c: Vector) -> Result<Self> {
        Self::new(ProblemKind::QuadToy, ParamBundle { design: q, target: c, reg: 1.0 })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn bundle(&self) -> &ParamBundle {
        &self.bundle
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn dim(&self) -> usize {
        self.bundle.design.ncols()
    }

    pub fn reg(&self) -> f64 {
        self.bundle.reg
    }

    fn rows(&self) -> usize {
        self.bundle.design.nrows()
    }

    fn check_x(&self, x: &Vector, what: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{what} has length {}, problem dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn check_direction(&self, du: &ParamDirection) -> Result<()> {
        if du.d_design.dim() != self.bundle.design.dim() || du.d_target.len() != self.bundle.target.len() {
            return Err(Error::Dimension("direction shape does not match parameter bundle".into()));
        }
        if self.kind == ProblemKind::LogisticL2 && du.d_target.iter().any(|&v| v != 0.0) {
            return Err(Error::Parameter("logistic labels are categorical; their direction must be zero".into()));
        }
        if self.kind == ProblemKind::QuadToy && du.d_reg != 0.0 {
            return Err(Error::Parameter("quadratic toy has no regularization parameter".into()));
        }
        Ok(())
    }

    /// `u + h·u̇`, with `L` and `μ` recomputed.
    pub fn perturbed(&self, du: &ParamDirection, h: f64) -> Result<Self> {
        self.check_direction(du)?;
        let bundle = ParamBundle {
            design: &self.bundle.design + &(&du.d_design * h),
            target: &self.bundle.target + &(&du.d_target * h),
            reg: self.bundle.reg + h * du.d_reg,
        };
        Self::new(self.kind, bundle)
    }

    pub fn smooth_value(&self, x: &Vector) -> Result<f64> {
        self.check_x(x, "x")?;
        let a = &self.bundle.design;
        let b = &self.bundle.target;
        Ok(match self.kind {
            ProblemKind::LassoL1 => {
                let r = a.dot(x) - b;
                0.5 * r.dot(&r)
            }
            ProblemKind::LogisticL2 => {
                let z = a.dot(x);
                z.iter().zip(b).map(|(zi, bi)| softplus(-bi * zi)).sum::<f64>() / self.rows() as f64
            }
            ProblemKind::QuadToy => 0.5 * x.dot(&a.dot(x)) - b.dot(x),
        })
    }

    pub fn reg_value(&self, x: &Vector) -> Result<f64> {
        self.check_x(x, "x")?;
        Ok(match self.kind {
            ProblemKind::LassoL1 => self.bundle.reg * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProblemKind::LogisticL2 => 0.5 * self.bundle.reg * x.dot(x),
            ProblemKind::QuadToy => 0.0,
        })
    }

    pub fn objective(&self, x: &Vector) -> Result<f64> {
        Ok(self.smooth_value(x)? + self.reg_value(x)?)
    }

    pub fn grad_f(&self, x: &Vector) -> Result<Vector> {
        self.check_x(x, "x")?;
        let a = &self.bundle.design;
        let b = &self.bundle.target;
        Ok(match self.kind {
            ProblemKind::LassoL1 => mat_t_vec(a, &(a.dot(x) - b)),
            ProblemKind::LogisticL2 => {
                let z = a.dot(x);
                let m = self.rows() as f64;
                let coef: Vector = z.iter().zip(b).map(|(zi, bi)| -bi * sigmoid(-bi * zi) / m).collect();
                mat_t_vec(a, &coef)
            }
            ProblemKind::QuadToy => a.dot(x) - b,
        })
    }

    /// Curvature weights `σ'(b_i z_i)` of the logistic data term at `x`.
    fn logistic_weights(&self, x: &Vector) -> Vector {
        let z = self.bundle.design.dot(x);
        z.iter()
            .zip(&self.bundle.target)
            .map(|(zi, bi)| {
                let s = sigmoid(bi * zi);
                bi * bi * s * (1.0 - s)
            })
            .collect()
    }

    pub fn hess_f(&self, x: &Vector) -> Result<Matrix> {
        self.check_x(x, "x")?;
        let a = &self.bundle.design;
        let mut h = match self.kind {
            ProblemKind::LassoL1 => a.t().dot(a),
            ProblemKind::LogisticL2 => {
                let w = self.logistic_weights(x);
                let m = self.rows() as f64;
                let scaled = a * &w.insert_axis(ndarray::Axis(1));
                a.t().dot(&scaled) / m
            }
            ProblemKind::QuadToy => a.clone(),
        };
        // exact symmetry; the two triangle products can differ in the last bit
        let n = h.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                h[[j, i]] = h[[i, j]];
            }
        }
        Ok(h)
    }

    /// Hessian-vector product `∇²f(x) v` without forming the Hessian.
    pub fn hvp(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        self.check_x(x, "x")?;
        self.check_x(v, "v")?;
        let a = &self.bundle.design;
        Ok(match self.kind {
            ProblemKind::LassoL1 => mat_t_vec(a, &a.dot(v)),
            ProblemKind::LogisticL2 => {
                let w = self.logistic_weights(x);
                let av = a.dot(v) * &w;
                mat_t_vec(a, &av) / self.rows() as f64
            }
            ProblemKind::QuadToy => a.dot(v),
        })
    }

    /// `D_u ∇_x f(x, u) · u̇`. For the logistic problem `λ` lives in `g`, so the
    /// `d_reg` component does not enter here.
    pub fn jvp_grad_f_wrt_u(&self, x: &Vector, du: &ParamDirection) -> Result<Vector> {
        self.check_x(x, "x")?;
        self.check_direction(du)?;
        let a = &self.bundle.design;
        let b = &self.bundle.target;
        let da = &du.d_design;
        Ok(match self.kind {
            ProblemKind::LassoL1 => {
                let r = a.dot(x) - b;
                let dr = da.dot(x) - &du.d_target;
                mat_t_vec(da, &r) + mat_t_vec(a, &dr)
            }
            ProblemKind::LogisticL2 => {
                let m = self.rows() as f64;
                let z = a.dot(x);
                let dz = da.dot(x);
                let coef: Vector = z.iter().zip(b).map(|(zi, bi)| -bi * sigmoid(-bi * zi) / m).collect();
                let dcoef: Vector = z
                    .iter()
                    .zip(b)
                    .zip(&dz)
                    .map(|((zi, bi), dzi)| {
                        let s = sigmoid(bi * zi);
                        bi * bi * s * (1.0 - s) * dzi / m
                    })
                    .collect();
                mat_t_vec(da, &coef) + mat_t_vec(a, &dcoef)
            }
            ProblemKind::QuadToy => da.dot(x) - &du.d_target,
        })
    }

    /// `∇f(y)` together with `∇²f(y)·ẏ + D_u∇f(y)·u̇`, sharing the products
    /// with `A` between the two. Agrees with [`Problem::grad_f`],
    /// [`Problem::hvp`] and [`Problem::jvp_grad_f_wrt_u`] up to rounding; the
    /// gradient part is bitwise identical to `grad_f`.
    pub fn grad_and_tangent(&self, y: &Vector, dy: &Vector, du: &ParamDirection) -> Result<(Vector, Vector)> {
        self.check_x(y, "y")?;
        self.check_x(dy, "dy")?;
        self.check_direction(du)?;
        let a = &self.bundle.design;
        let b = &self.bundle.target;
        let da = &du.d_design;
        Ok(match self.kind {
            ProblemKind::LassoL1 => {
                let r = a.dot(y) - b;
                let grad = mat_t_vec(a, &r);
                let dr = a.dot(dy) + da.dot(y) - &du.d_target;
                (grad, mat_t_vec(a, &dr) + mat_t_vec(da, &r))
            }
            ProblemKind::LogisticL2 => {
                let m = self.rows() as f64;
                let z = a.dot(y);
                let coef: Vector = z.iter().zip(b).map(|(zi, bi)| -bi * sigmoid(-bi * zi) / m).collect();
                let grad = mat_t_vec(a, &coef);
                let dz = a.dot(dy) + da.dot(y);
                let dcoef: Vector = z
                    .iter()
                    .zip(b)
                    .zip(&dz)
                    .map(|((zi, bi), dzi)| {
                        let s = sigmoid(bi * zi);
                        bi * bi * s * (1.0 - s) * dzi / m
                    })
                    .collect();
                (grad, mat_t_vec(a, &dcoef) + mat_t_vec(da, &coef))
            }
            ProblemKind::QuadToy => (a.dot(y) - b, a.dot(dy) + da.dot(y) - &du.d_target),
        })
    }

    fn check_step(alpha: f64) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Parameter(format!("step size must be positive, got {alpha}")));
        }
        Ok(())
    }

    /// `argmin_x α g(x, u) + ½‖x − w‖²`.
    pub fn prox_g(&self, w: &Vector, alpha: f64) -> Result<Vector> {
        self.check_x(w, "w")?;
        Self::check_step(alpha)?;
        let lam = self.bundle.reg;
        Ok(match self.kind {
            ProblemKind::LassoL1 => {
                let t = alpha * lam;
                w.mapv(|wi| wi.signum() * (wi.abs() - t).max(0.0))
            }
            ProblemKind::LogisticL2 => w / (1.0 + alpha * lam),
            ProblemKind::QuadToy => w.clone(),
        })
    }

    /// Diagonal of `∂prox/∂w` at `w`. At a soft-threshold kink the derivative is 0.
    pub fn prox_derivative_diag(&self, w: &Vector, alpha: f64) -> Result<Vector> {
        self.check_x(w, "w")?;
        Self::check_step(alpha)?;
        let lam = self.bundle.reg;
        Ok(match self.kind {
            ProblemKind::LassoL1 => {
                let t = alpha * lam;
                w.mapv(|wi| if wi.abs() > t { 1.0 } else { 0.0 })
            }
            ProblemKind::LogisticL2 => Vector::from_elem(w.len(), 1.0 / (1.0 + alpha * lam)),
            ProblemKind::QuadToy => Vector::ones(w.len()),
        })
    }

    /// Directional derivative of `(w, u, α) ↦ prox_{αg(·,u)}(w)` along `(ẇ, u̇, α̇)`.
    pub fn prox_jvp(&self, w: &Vector, alpha: f64, dw: &Vector, du: &ParamDirection, dalpha: f64) -> Result<Vector> {
        self.check_x(w, "w")?;
        self.check_x(dw, "dw")?;
        Self::check_step(alpha)?;
        let lam = self.bundle.reg;
        let dthresh = alpha * du.d_reg + dalpha * lam;
        Ok(match self.kind {
            ProblemKind::LassoL1 => {
                let t = alpha * lam;
                Vector::from_shape_fn(w.len(), |i| if w[i].abs() > t { dw[i] - dthresh * w[i].signum() } else { 0.0 })
            }
            ProblemKind::LogisticL2 => {
                let s = 1.0 + alpha * lam;
                (dw * s - w * dthresh) / (s * s)
            }
            ProblemKind::QuadToy => dw.clone(),
        })
    }

    /// Number of coordinates sitting exactly on a soft-threshold kink.
    pub fn kink_count(&self, w: &Vector, alpha: f64) -> usize {
        match self.kind {
            ProblemKind::LassoL1 => {
                let t = alpha * self.bundle.reg;
                w.iter().filter(|wi| wi.abs() == t).count()
            }
            _ => 0,
        }
    }

    pub fn tangent_mask(&self, x: &Vector) -> Result<TangentMask> {
        self.check_x(x, "x")?;
        Ok(match self.kind {
            ProblemKind::LassoL1 => TangentMask { active: x.iter().map(|&v| v != 0.0).collect() },
            _ => TangentMask::full(x.len()),
        })
    }

    /// `‖x − prox(x − α ∇f(x))‖`.
    pub fn fixed_point_residual(&self, x: &Vector, alpha: f64) -> Result<f64> {
        let w = x - &(self.grad_f(x)? * alpha);
        Ok(norm_of(&(x - &self.prox_g(&w, alpha)?)))
    }

    pub fn check_assumptions(&self, x_star: &Vector) -> Result<AssumptionReport> {
        self.check_x(x_star, "x_star")?;
        let lam = self.bundle.reg;
        Ok(match self.kind {
            ProblemKind::LassoL1 => {
                let mask = self.tangent_mask(x_star)?;
                let support = mask.support();
                let rpd_margin = if support.is_empty() {
                    f64::INFINITY
                } else {
                    let h = self.hess_f(x_star)?;
                    symmetric_eigenvalues(&principal_submatrix(&h, &support))?[0]
                };
                let g = self.grad_f(x_star)?;
                let nd_margin = mask
                    .active
                    .iter()
                    .zip(g.iter())
                    .filter(|(a, _)| !**a)
                    .map(|(_, gi)| 1.0 - gi.abs() / lam)
                    .fold(1.0, f64::min);
                AssumptionReport {
                    rpd: rpd_margin > RPD_THRESHOLD,
                    rpd_margin,
                    nd: nd_margin > ND_MARGIN,
                    nd_margin,
                    support_size: support.len(),
                }
            }
            ProblemKind::LogisticL2 => {
                let h = self.hess_f(x_star)?;
                let rpd_margin = symmetric_eigenvalues(&h)?[0] + lam;
                AssumptionReport {
                    rpd: rpd_margin > RPD_THRESHOLD,
                    rpd_margin,
                    nd: true,
                    nd_margin: 1.0,
                    support_size: self.dim(),
                }
            }
            ProblemKind::QuadToy => {
                let rpd_margin = symmetric_eigenvalues(&self.bundle.design)?[0];
                AssumptionReport {
                    rpd: rpd_margin > RPD_THRESHOLD,
                    rpd_margin,
                    nd: true,
                    nd_margin: 1.0,
                    support_size: self.dim(),
                }
            }
        })
    }
}
