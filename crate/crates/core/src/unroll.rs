//! Forward-mode differentiation of the extrapolated proximal gradient trace.
//!
//! Alongside every primal step the directional derivatives are propagated:
//!
//! ```text
//! ẏ_k     = (1 + β_k) ẋ_k − β_k ẋ_{k−1}
//! ẇ_k     = ẏ_k − α_k (∇²f(y_k) ẏ_k + D_u∇f(y_k)·u̇)
//! ẋ_{k+1} = D prox(w_k)·(ẇ_k, u̇, α̇ = 0)
//! ```
//!
//! Step sizes and momentum parameters are detached: they enter as constants.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm_of, Vector};
use crate::problems::{ParamDirection, Problem};
use crate::solver::{Schedule, SolveTrace};

#[derive(Debug, Clone, Serialize)]
pub struct JvpTrace {
    pub primal: SolveTrace,
    /// `ẋ_0, …, ẋ_K`.
    pub dots: Vec<Vector>,
    pub direction: ParamDirection,
    /// Coordinates that sat exactly on a prox kink at each step.
    pub kink_hits: Vec<usize>,
}

impl JvpTrace {
    pub fn last_dot(&self) -> &Vector {
        self.dots.last().expect("trace holds at least ẋ_0")
    }

    pub fn primal_errors(&self, x_star: &Vector) -> Vec<f64> {
        self.primal.iterates.iter().map(|x| norm_of(&(x - x_star))).collect()
    }

    pub fn derivative_errors(&self, dpsi_dot: &Vector) -> Vec<f64> {
        self.dots.iter().map(|d| norm_of(&(d - dpsi_dot))).collect()
    }

    /// Writes `k,primal_error,derivative_error`.
    pub fn write_csv<W: Write>(&self, mut out: W, x_star: &Vector, dpsi_dot: &Vector) -> Result<()> {
        writeln!(out, "k,primal_error,derivative_error")?;
        for (k, (pe, de)) in self.primal_errors(x_star).iter().zip(self.derivative_errors(dpsi_dot)).enumerate() {
            writeln!(out, "{k},{pe:e},{de:e}")?;
        }
        Ok(())
    }
}

/// PGD with variable steps; the schedule must not carry momentum.
pub fn unroll_pgd(
    p: &Problem,
    x0: &Vector,
    sched: &Schedule,
    du: &ParamDirection,
    iterations: usize,
) -> Result<JvpTrace> {
    if sched.has_momentum() {
        return Err(Error::Schedule("unroll_pgd expects a schedule without momentum".into()));
    }
    unroll_from(p, x0, &Vector::zeros(p.dim()), sched, du, iterations)
}

/// APG / extrapolated PGD with the doubled-state derivative recursion.
pub fn unroll_apg(
    p: &Problem,
    x0: &Vector,
    sched: &Schedule,
    du: &ParamDirection,
    iterations: usize,
) -> Result<JvpTrace> {
    unroll_from(p, x0, &Vector::zeros(p.dim()), sched, du, iterations)
}

/// General entry point: starts from `(x_0, ẋ_0)` with `x_{−1} = x_0`,
/// `ẋ_{−1} = ẋ_0`.
pub fn unroll_from(
    p: &Problem,
    x0: &Vector,
    dot0: &Vector,
    sched: &Schedule,
    du: &ParamDirection,
    iterations: usize,
) -> Result<JvpTrace> {
    sched.validate(p.lipschitz(), iterations)?;
    p.check_direction(du)?;
    if x0.len() != p.dim() || dot0.len() != p.dim() {
        return Err(Error::Dimension("initial point or tangent does not match problem dimension".into()));
    }
    let mut stream = sched.stream();
    let mut iterates = Vec::with_capacity(iterations + 1);
    let mut dots = Vec::with_capacity(iterations + 1);
    let mut steps_used = Vec::with_capacity(iterations);
    let mut momenta_used = Vec::with_capacity(iterations);
    let mut kink_hits = Vec::with_capacity(iterations);
    iterates.push(x0.clone());
    dots.push(dot0.clone());
    let mut x_prev = x0.clone();
    let mut dot_prev = dot0.clone();

    for k in 0..iterations {
        let (alpha, beta) = stream.next_pair();
        let x = &iterates[k];
        let dot = &dots[k];
        let y = x * (1.0 + beta) - &x_prev * beta;
        let dy = dot * (1.0 + beta) - &dot_prev * beta;
        let (grad, tangent) = p.grad_and_tangent(&y, &dy, du)?;
        let w = &y - &(grad * alpha);
        let next = p.prox_g(&w, alpha)?;
        let dw = &dy - &(tangent * alpha);
        let dnext = p.prox_jvp(&w, alpha, &dw, du, 0.0)?;

        kink_hits.push(p.kink_count(&w, alpha));
        x_prev = iterates[k].clone();
        dot_prev = dot.clone();
        iterates.push(next);
        dots.push(dnext);
        steps_used.push(alpha);
        momenta_used.push(beta);
    }

    Ok(JvpTrace {
        primal: SolveTrace { iterates, steps_used, momenta_used, errors: None },
        dots,
        direction: du.clone(),
        kink_hits,
    })
}

/// Directional derivative of `u ↦ ℓ(x_K(u), u)` along the trace's direction,
/// given `∇_x ℓ(x_K)` and the explicit part `D_u ℓ · u̇`.
pub fn hypergradient(trace: &JvpTrace, outer_grad_x: &Vector, outer_grad_u_dot: f64) -> Result<f64> {
    let dot = trace.last_dot();
    if outer_grad_x.len() != dot.len() {
        return Err(Error::Dimension(format!(
            "outer gradient has length {}, iterates have length {}",
            outer_grad_x.len(),
            dot.len()
        )));
    }
    Ok(outer_grad_x.dot(dot) + outer_grad_u_dot)
}
