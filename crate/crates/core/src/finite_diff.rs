//! Central finite differences over parameter space.
//!
//! These re-run the primal solvers on `u ± h·u̇` and never touch the
//! derivative recursions, so they serve as an independent check on both the
//! unrolled and the implicit derivatives.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm_of, Vector};
use crate::problems::{ParamDirection, Problem};
use crate::solver::{reference_solve, run_epg_unchecked, Schedule};

/// Candidate step sizes; the most self-consistent one is kept.
pub const FD_STEPS: [f64; 3] = [1e-5, 1e-6, 1e-7];

#[derive(Debug, Clone, Serialize)]
pub struct FdEstimate {
    pub derivative: Vector,
    pub h: f64,
    /// Relative distance to the closest other candidate.
    pub stability: f64,
}

/// `(x_K(u + h u̇) − x_K(u − h u̇)) / 2h` with the schedule replayed verbatim.
pub fn fd_solver_map(
    p: &Problem,
    x0: &Vector,
    sched: &Schedule,
    du: &ParamDirection,
    iterations: usize,
    h: f64,
) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step must be positive, got {h}")));
    }
    let plus = p.perturbed(du, h)?;
    let minus = p.perturbed(du, -h)?;
    let xp = run_epg_unchecked(&plus, x0, sched, iterations)?;
    let xm = run_epg_unchecked(&minus, x0, sched, iterations)?;
    Ok((xp.last() - xm.last()) / (2.0 * h))
}

/// `(ψ(u + h u̇) − ψ(u − h u̇)) / 2h` through the reference solver.
pub fn fd_solution_map(p: &Problem, du: &ParamDirection, h: f64, tol: f64) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step must be positive, got {h}")));
    }
    let (xp, _) = reference_solve(&p.perturbed(du, h)?, tol)?;
    let (xm, _) = reference_solve(&p.perturbed(du, -h)?, tol)?;
    Ok((xp - xm) / (2.0 * h))
}

/// Picks the candidate whose nearest neighbour among the other candidates is
/// closest in relative terms.
pub fn most_stable(candidates: Vec<(f64, Vector)>) -> FdEstimate {
    let rel = |a: &Vector, b: &Vector| norm_of(&(a - b)) / (1.0 + norm_of(a));
    let mut best: Option<FdEstimate> = None;
    for (i, (h, d)) in candidates.iter().enumerate() {
        let stability = candidates
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (_, o))| rel(d, o))
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| stability < b.stability) {
            best = Some(FdEstimate { derivative: d.clone(), h: *h, stability });
        }
    }
    best.expect("at least one candidate")
}

pub fn fd_solver_map_sweep(
    p: &Problem,
    x0: &Vector,
    sched: &Schedule,
    du: &ParamDirection,
    iterations: usize,
) -> Result<FdEstimate> {
    let candidates = FD_STEPS
        .iter()
        .map(|&h| Ok((h, fd_solver_map(p, x0, sched, du, iterations, h)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(most_stable(candidates))
}

pub fn fd_solution_map_sweep(p: &Problem, du: &ParamDirection, tol: f64) -> Result<FdEstimate> {
    let candidates = FD_STEPS.iter().map(|&h| Ok((h, fd_solution_map(p, du, h, tol)?))).collect::<Result<Vec<_>>>()?;
    Ok(most_stable(candidates))
}
