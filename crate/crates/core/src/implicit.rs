//! Implicit differentiation of the solution map through the fixed-point
//! equation of one proximal-gradient step (or its doubled APG form).
//!
//! With `J = D_x T_α(x*, u)` and `r = D_u T_α(x*, u)·u̇`, the derivative
//! `v = Dψ(u)·u̇` solves `(I − J Π) v = r`, where `Π` is the tangent mask at
//! `x*`. Both regularizers have flat active manifolds, so the system is solved
//! densely on the support and extended by `v_off = r_off + J_{off,S} v_S`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    eig2_max_modulus, norm_of, principal_submatrix, solve_linear, spectral_radius, symmetric_eigenvalues, Matrix,
    SpectralReport, Vector, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::problems::{AssumptionReport, ParamDirection, Problem, TangentMask};

/// Allowed relative disagreement between the two blocks of the APG solution.
pub const BLOCK_AGREEMENT_TOL: f64 = 1e-10;

/// Relative asymmetry below which `J_SS` is treated as symmetric.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ImplicitStats {
    pub reduced_dim: usize,
    /// `‖v − (J Π v + r)‖`.
    pub derivative_residual: f64,
    pub radius_converged: bool,
    pub assumptions: AssumptionReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImplicitSolution {
    pub x_star: Vector,
    pub mask: TangentMask,
    pub dpsi_dot: Vector,
    /// `ρ(J Π)` for PGD, `ρ` of the doubled Jacobian for APG.
    pub contraction_radius: f64,
    pub stats: ImplicitStats,
}

struct StepLinearization {
    jac: Matrix,
    rhs: Vector,
    mask: TangentMask,
    assumptions: AssumptionReport,
}

fn linearize(p: &Problem, x_star: &Vector, alpha: f64, du: &ParamDirection) -> Result<StepLinearization> {
    if !(alpha > 0.0 && alpha < 2.0 / p.lipschitz()) {
        return Err(Error::Parameter(format!("step {alpha} outside (0, 2/L) = (0, {})", 2.0 / p.lipschitz())));
    }
    p.check_direction(du)?;
    let assumptions = p.check_assumptions(x_star)?;
    if !assumptions.nd {
        return Err(Error::Assumption(format!("non-degeneracy fails (margin {:e})", assumptions.nd_margin)));
    }
    if !assumptions.rpd {
        return Err(Error::Assumption(format!(
            "restricted positive definiteness fails (margin {:e})",
            assumptions.rpd_margin
        )));
    }
    let n = p.dim();
    let w = x_star - &(p.grad_f(x_star)? * alpha);
    let dprox = p.prox_derivative_diag(&w, alpha)?;
    let mut jac = -p.hess_f(x_star)? * alpha;
    for i in 0..n {
        jac[[i, i]] += 1.0;
    }
    for i in 0..n {
        jac.row_mut(i).mapv_inplace(|v| v * dprox[i]);
    }
    let dw = p.jvp_grad_f_wrt_u(x_star, du)? * (-alpha);
    let rhs = p.prox_jvp(&w, alpha, &dw, du, 0.0)?;
    let mask = p.tangent_mask(x_star)?;
    Ok(StepLinearization { jac, rhs, mask, assumptions })
}

fn is_symmetric(m: &Matrix) -> bool {
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[[i, j]] - m[[j, i]]).abs() <= SYMMETRY_TOL * scale))
}

/// `ρ(J_SS)`, or with `beta` the radius of `[[(1+β)J, −βJ], [I, 0]]`.
///
/// For symmetric `J_SS` (every problem here: the prox derivative is constant
/// on the support) the doubled spectrum is exact: each eigenvalue `λ` of `J`
/// contributes the roots of `z² − (1+β)λ z + βλ`. Power iteration on the
/// strongly non-normal doubled matrix is only the fallback.
fn restricted_radius(j_ss: &Matrix, doubled: Option<(&Matrix, f64)>) -> Result<SpectralReport> {
    if is_symmetric(j_ss) {
        let eigs = symmetric_eigenvalues(j_ss)?;
        let radius = match doubled {
            None => eigs.iter().fold(0.0f64, |a, l| a.max(l.abs())),
            Some((_, b)) => eigs.iter().fold(0.0f64, |a, &l| a.max(eig2_max_modulus((1.0 + b) * l, -b * l, 1.0, 0.0))),
        };
        return Ok(SpectralReport { radius, iterations_used: 0, converged: true });
    }
    spectral_radius(doubled.map_or(j_ss, |(d, _)| d), DEFAULT_TOL, DEFAULT_MAX_ITER)
}

fn extend_off_support(lin: &StepLinearization, support: &[usize], v_s: &Vector) -> Vector {
    let n = lin.rhs.len();
    let mut v = Vector::zeros(n);
    for (k, &i) in support.iter().enumerate() {
        v[i] = v_s[k];
    }
    for i in 0..n {
        if !lin.mask.active[i] {
            let coupling: f64 = support.iter().enumerate().map(|(k, &j)| lin.jac[[i, j]] * v_s[k]).sum();
            v[i] = lin.rhs[i] + coupling;
        }
    }
    v
}

fn derivative_residual(lin: &StepLinearization, v: &Vector) -> f64 {
    let masked: Vector = v.iter().zip(&lin.mask.active).map(|(x, &a)| if a { *x } else { 0.0 }).collect();
    norm_of(&(v - &(lin.jac.dot(&masked) + &lin.rhs)))
}

pub fn implicit_jvp_pgd(p: &Problem, x_star: &Vector, alpha: f64, du: &ParamDirection) -> Result<ImplicitSolution> {
    let lin = linearize(p, x_star, alpha, du)?;
    let support = lin.mask.support();
    let s = support.len();
    if s == 0 {
        let v = extend_off_support(&lin, &support, &Vector::zeros(0));
        let derivative_residual = derivative_residual(&lin, &v);
        return Ok(ImplicitSolution {
            x_star: x_star.clone(),
            mask: lin.mask.clone(),
            dpsi_dot: v,
            contraction_radius: 0.0,
            stats: ImplicitStats {
                reduced_dim: 0,
                derivative_residual,
                radius_converged: true,
                assumptions: lin.assumptions,
            },
        });
    }
    let j_ss = principal_submatrix(&lin.jac, &support);
    let radius = restricted_radius(&j_ss, None)?;
    if radius.radius >= 1.0 {
        return Err(Error::Contraction { radius: radius.radius, context: "restricted PGD step Jacobian".into() });
    }
    let system = Matrix::eye(s) - &j_ss;
    let r_s: Vector = support.iter().map(|&i| lin.rhs[i]).collect();
    let v_s = solve_linear(&system, &r_s)?;
    let v = extend_off_support(&lin, &support, &v_s);
    let derivative_residual = derivative_residual(&lin, &v);
    Ok(ImplicitSolution {
        x_star: x_star.clone(),
        mask: lin.mask.clone(),
        dpsi_dot: v,
        contraction_radius: radius.radius,
        stats: ImplicitStats {
            reduced_dim: s,
            derivative_residual,
            radius_converged: radius.converged,
            assumptions: lin.assumptions,
        },
    })
}

/// Doubled-state version for the APG update `(x₁, x₂) ↦ (T(x₁ + β(x₁ − x₂)), x₁)`.
pub fn implicit_jvp_apg(
    p: &Problem,
    x_star: &Vector,
    alpha: f64,
    beta: f64,
    du: &ParamDirection,
) -> Result<ImplicitSolution> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Parameter(format!("momentum {beta} outside [0, 1]")));
    }
    let lin = linearize(p, x_star, alpha, du)?;
    let support = lin.mask.support();
    let s = support.len();
    if s == 0 {
        return implicit_jvp_pgd(p, x_star, alpha, du);
    }
    let j_ss = principal_submatrix(&lin.jac, &support);
    let lam_min = symmetric_eigenvalues(&j_ss)?[0];
    let bound = -1.0 / (1.0 + 2.0 * beta);
    if !(lam_min > bound) {
        return Err(Error::Assumption(format!(
            "smallest eigenvalue {lam_min} of the restricted step Jacobian not above −1/(1+2β) = {bound}"
        )));
    }

    let mut doubled = Matrix::zeros((2 * s, 2 * s));
    for i in 0..s {
        for j in 0..s {
            doubled[[i, j]] = (1.0 + beta) * j_ss[[i, j]];
            doubled[[i, s + j]] = -beta * j_ss[[i, j]];
        }
        doubled[[s + i, i]] = 1.0;
    }
    let radius = restricted_radius(&j_ss, Some((&doubled, beta)))?;
    if radius.radius >= 1.0 {
        return Err(Error::Contraction { radius: radius.radius, context: "doubled APG Jacobian".into() });
    }

    let system = Matrix::eye(2 * s) - &doubled;
    let mut rhs = Vector::zeros(2 * s);
    for (k, &i) in support.iter().enumerate() {
        rhs[k] = lin.rhs[i];
    }
    let sol = solve_linear(&system, &rhs)?;
    let v1 = sol.slice(ndarray::s![..s]).to_owned();
    let v2 = sol.slice(ndarray::s![s..]).to_owned();
    let gap = norm_of(&(&v1 - &v2)) / (1.0 + norm_of(&v1));
    if gap > BLOCK_AGREEMENT_TOL {
        return Err(Error::BlockDisagreement(gap));
    }
    let v = extend_off_support(&lin, &support, &v1);
    let derivative_residual = derivative_residual(&lin, &v);
    Ok(ImplicitSolution {
        x_star: x_star.clone(),
        mask: lin.mask.clone(),
        dpsi_dot: v,
        contraction_radius: radius.radius,
        stats: ImplicitStats {
            reduced_dim: 2 * s,
            derivative_residual,
            radius_converged: radius.converged,
            assumptions: lin.assumptions,
        },
    })
}
