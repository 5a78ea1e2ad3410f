//! Proximal gradient with extrapolation:
//!
//! ```text
//! y_k     = (1 + β_k) x_k − β_k x_{k−1}
//! w_k     = y_k − α_k ∇f(y_k)
//! x_{k+1} = prox_{α_k g}(w_k)
//! ```
//!
//! with `x_{−1} = x_0`. `β_k ≡ 0` gives PGD with variable step sizes.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_of, select_columns, solve_linear, Vector};
use crate::problems::{Problem, ProblemKind};

/// Iteration cap for the reference and warm-start solvers.
pub const SOLVER_ITERATION_CAP: usize = 1_000_000;

/// Damped Newton needs tens of steps here; the cap only guards against stalls.
const NEWTON_ITERATION_CAP: usize = 500;
/// Relative Newton decrement below which line searches are skipped.
const NEWTON_FLAT_DECREMENT: f64 = 1e-13;
/// Extra Newton steps taken once the gradient tolerance is met.
const NEWTON_POLISH_STEPS: usize = 2;

/// Draws from the lowest random regime are clipped to at least this multiple of `1/L`.
pub const LOW_REGIME_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed(f64),
    /// `α_k ~ U[lo, hi)`, then `max(α_k, floor)`.
    UniformRandom {
        lo: f64,
        hi: f64,
        floor: f64,
        seed: u64,
    },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumRule {
    None,
    /// `β_k = (k − 1)/(k + 5)`, clamped at 0 for the first two iterations.
    NesterovShifted,
    Fixed(f64),
    Explicit(Vec<f64>),
}

/// The three random step-size regimes, as fractions of `2/L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRegime {
    /// `U(0, 2/(3L))`
    Low,
    /// `U(2/(3L), 4/(3L))`
    Mid,
    /// `U(4/(3L), 2/L)`
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub step: StepRule,
    pub momentum: MomentumRule,
}

impl Schedule {
    pub fn fixed(alpha: f64) -> Self {
        Self { step: StepRule::Fixed(alpha), momentum: MomentumRule::None }
    }

    pub fn random(regime: StepRegime, lipschitz: f64, seed: u64) -> Self {
        let (lo, hi) = match regime {
            StepRegime::Low => (0.0, 2.0 / (3.0 * lipschitz)),
            StepRegime::Mid => (2.0 / (3.0 * lipschitz), 4.0 / (3.0 * lipschitz)),
            StepRegime::High => (4.0 / (3.0 * lipschitz), 2.0 / lipschitz),
        };
        let floor = match regime {
            StepRegime::Low => LOW_REGIME_FLOOR / lipschitz,
            _ => lo,
        };
        Self { step: StepRule::UniformRandom { lo, hi, floor, seed }, momentum: MomentumRule::None }
    }

    /// Fixed step with `β_k = (k − 1)/(k + 5)`.
    pub fn accelerated(alpha: f64) -> Self {
        Self { step: StepRule::Fixed(alpha), momentum: MomentumRule::NesterovShifted }
    }

    /// Replays the exact `α_k`, `β_k` of an earlier run.
    pub fn replay(trace: &SolveTrace) -> Self {
        Self {
            step: StepRule::Explicit(trace.steps_used.clone()),
            momentum: MomentumRule::Explicit(trace.momenta_used.clone()),
        }
    }

    pub fn has_momentum(&self) -> bool {
        !matches!(self.momentum, MomentumRule::None)
    }

    /// Checks that every `α_k` lies in `(0, 2/L)` and every `β_k` in `[0, 1]`
    /// for the first `iterations` steps.
    pub fn validate(&self, lipschitz: f64, iterations: usize) -> Result<()> {
        let upper = 2.0 / lipschitz;
        let admissible = |a: f64| a > 0.0 && a < upper && a.is_finite();
        match &self.step {
            StepRule::Fixed(a) => {
                if !admissible(*a) {
                    return Err(Error::Schedule(format!("step {a} outside (0, 2/L) = (0, {upper})")));
                }
            }
            StepRule::UniformRandom { lo, hi, floor, .. } => {
                if !(*lo >= 0.0 && lo < hi && *hi <= upper && *floor > 0.0 && floor < hi) {
                    return Err(Error::Schedule(format!(
                        "random step range [{lo}, {hi}) with floor {floor} not inside (0, 2/L) = (0, {upper})"
                    )));
                }
            }
            StepRule::Explicit(steps) => {
                if steps.len() < iterations {
                    return Err(Error::Schedule(format!("{} explicit steps for {iterations} iterations", steps.len())));
                }
                if let Some(a) = steps[..iterations].iter().find(|&&a| !admissible(a)) {
                    return Err(Error::Schedule(format!("step {a} outside (0, 2/L) = (0, {upper})")));
                }
            }
        }
        self.validate_momentum(iterations)
    }

    fn validate_momentum(&self, iterations: usize) -> Result<()> {
        let ok = |b: f64| (0.0..=1.0).contains(&b);
        match &self.momentum {
            MomentumRule::Fixed(b) if !ok(*b) => Err(Error::Schedule(format!("momentum {b} outside [0, 1]"))),
            MomentumRule::Explicit(bs) => {
                if bs.len() < iterations {
                    return Err(Error::Schedule(format!("{} explicit momenta for {iterations} iterations", bs.len())));
                }
                match bs[..iterations].iter().find(|&&b| !ok(b)) {
                    Some(b) => Err(Error::Schedule(format!("momentum {b} outside [0, 1]"))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn stream(&self) -> ScheduleStream<'_> {
        let rng = match self.step {
            StepRule::UniformRandom { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        ScheduleStream { schedule: self, rng, k: 0 }
    }
}

pub(crate) struct ScheduleStream<'a> {
    schedule: &'a Schedule,
    rng: Option<ChaCha8Rng>,
    k: usize,
}

impl ScheduleStream<'_> {
    /// `(α_k, β_k)` for the current `k`, then advances.
    pub(crate) fn next_pair(&mut self) -> (f64, f64) {
        let k = self.k;
        self.k += 1;
        let alpha = match &self.schedule.step {
            StepRule::Fixed(a) => *a,
            StepRule::UniformRandom { lo, hi, floor, .. } => {
                let rng = self.rng.as_mut().expect("random schedule carries an rng");
                rng.random_range(*lo..*hi).max(*floor)
            }
            StepRule::Explicit(steps) => steps[k],
        };
        let beta = match &self.schedule.momentum {
            MomentumRule::None => 0.0,
            MomentumRule::NesterovShifted => nesterov_shifted(k),
            MomentumRule::Fixed(b) => *b,
            MomentumRule::Explicit(bs) => bs[k],
        };
        (alpha, beta)
    }
}

pub fn nesterov_shifted(k: usize) -> f64 {
    ((k as f64 - 1.0) / (k as f64 + 5.0)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    /// `x_0, …, x_K`.
    pub iterates: Vec<Vector>,
    pub steps_used: Vec<f64>,
    pub momenta_used: Vec<f64>,
    /// `‖x_k − x_ref‖`, filled by [`SolveTrace::attach_errors`].
    pub errors: Option<Vec<f64>>,
}

impl SolveTrace {
    pub fn last(&self) -> &Vector {
        self.iterates.last().expect("trace holds at least x_0")
    }

    pub fn iterations(&self) -> usize {
        self.steps_used.len()
    }

    pub fn attach_errors(&mut self, reference: &Vector) {
        self.errors = Some(self.iterates.iter().map(|x| norm_of(&(x - reference))).collect());
    }

    /// Writes `k,error,alpha_k,beta_k`; the last row has no step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,error,alpha_k,beta_k")?;
        for k in 0..self.iterates.len() {
            let err = self.errors.as_ref().map(|e| format!("{:e}", e[k])).unwrap_or_default();
            match (self.steps_used.get(k), self.momenta_used.get(k)) {
                (Some(a), Some(b)) => writeln!(out, "{k},{err},{a:e},{b:e}")?,
                _ => writeln!(out, "{k},{err},,")?,
            }
        }
        Ok(())
    }
}

/// One extrapolated proximal-gradient step. Returns `(x_{k+1}, y_k, w_k)`.
pub(crate) fn epg_step(
    p: &Problem,
    x: &Vector,
    x_prev: &Vector,
    alpha: f64,
    beta: f64,
) -> Result<(Vector, Vector, Vector)> {
    let y = x * (1.0 + beta) - x_prev * beta;
    let w = &y - &(p.grad_f(&y)? * alpha);
    let next = p.prox_g(&w, alpha)?;
    Ok((next, y, w))
}

pub fn run_epg(p: &Problem, x0: &Vector, sched: &Schedule, iterations: usize) -> Result<SolveTrace> {
    sched.validate(p.lipschitz(), iterations)?;
    run_epg_unchecked(p, x0, sched, iterations)
}

/// [`run_epg`] without schedule validation; used when replaying a recorded
/// schedule on a perturbed problem whose `L` differs slightly.
pub fn run_epg_unchecked(p: &Problem, x0: &Vector, sched: &Schedule, iterations: usize) -> Result<SolveTrace> {
    if x0.len() != p.dim() {
        return Err(Error::Dimension(format!("x0 has length {}, problem dimension is {}", x0.len(), p.dim())));
    }
    let mut stream = sched.stream();
    let mut iterates = Vec::with_capacity(iterations + 1);
    let mut steps_used = Vec::with_capacity(iterations);
    let mut momenta_used = Vec::with_capacity(iterations);
    iterates.push(x0.clone());
    let mut prev = x0.clone();
    for k in 0..iterations {
        let (alpha, beta) = stream.next_pair();
        let (next, _, _) = epg_step(p, &iterates[k], &prev, alpha, beta)?;
        prev = iterates[k].clone();
        iterates.push(next);
        steps_used.push(alpha);
        momenta_used.push(beta);
    }
    Ok(SolveTrace { iterates, steps_used, momenta_used, errors: None })
}

/// Smallest `K_id` such that every iterate from `K_id` on has the support of
/// `x_star`. `None` if the final iterate still differs.
pub fn identification_index(iterates: &[Vector], x_star: &Vector) -> Option<usize> {
    let same = |x: &Vector| x.iter().zip(x_star).all(|(a, b)| (*a != 0.0) == (*b != 0.0));
    let last_bad = iterates.iter().rposition(|x| !same(x));
    match last_bad {
        None => Some(0),
        Some(i) if i + 1 < iterates.len() => Some(i + 1),
        Some(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveCertificate {
    pub method: &'static str,
    /// `‖∇F‖` for smooth problems, fixed-point residual at `α = 1/L` for lasso.
    pub residual: f64,
    pub iterations: usize,
}

/// High-accuracy minimizer used as `x*` by every experiment.
pub fn reference_solve(p: &Problem, tol: f64) -> Result<(Vector, SolveCertificate)> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    match p.kind() {
        ProblemKind::QuadToy => {
            let b = p.bundle();
            let x = solve_linear(&b.design, &b.target)?;
            let residual = norm_of(&p.grad_f(&x)?);
            Ok((x, SolveCertificate { method: "direct", residual, iterations: 0 }))
        }
        ProblemKind::LogisticL2 => newton_solve(p, tol),
        ProblemKind::LassoL1 => apg_reference(p, tol),
    }
}

fn total_gradient(p: &Problem, x: &Vector) -> Result<Vector> {
    Ok(p.grad_f(x)? + x * p.reg())
}

fn newton_solve(p: &Problem, tol: f64) -> Result<(Vector, SolveCertificate)> {
    let n = p.dim();
    let mut x = Vector::zeros(n);
    let mut g = total_gradient(p, &x)?;
    let mut gnorm = norm_of(&g);
    let mut polish = 0;
    for it in 0..NEWTON_ITERATION_CAP {
        if gnorm <= tol {
            // quadratic convergence: a couple more steps reach round-off
            if polish == NEWTON_POLISH_STEPS {
                return Ok((x, SolveCertificate { method: "newton", residual: gnorm, iterations: it }));
            }
            polish += 1;
        }
        let mut h = p.hess_f(&x)?;
        for i in 0..n {
            h[[i, i]] += p.reg();
        }
        let dir = solve_linear(&h, &(-&g))?;
        let f0 = p.objective(&x)?;
        let slope = g.dot(&dir);
        // Once the predicted decrease is below round-off in F, objective
        // comparisons are noise: take the full step and use ‖∇F‖ as the merit.
        let flat = -slope <= NEWTON_FLAT_DECREMENT * (1.0 + f0.abs());
        let mut accepted = None;
        if !flat {
            let mut t = 1.0;
            for _ in 0..60 {
                let cand = &x + &(&dir * t);
                if p.objective(&cand)? <= f0 + 1e-4 * t * slope {
                    accepted = Some(cand);
                    break;
                }
                t *= 0.5;
            }
        }
        let armijo = accepted.is_some();
        let cand = accepted.unwrap_or_else(|| &x + &dir);
        let g_new = total_gradient(p, &cand)?;
        let gnorm_new = norm_of(&g_new);
        if !armijo && gnorm_new >= gnorm {
            if gnorm <= tol {
                return Ok((x, SolveCertificate { method: "newton", residual: gnorm, iterations: it }));
            }
            return Err(Error::Convergence { iterations: it, residual: gnorm });
        }
        x = cand;
        g = g_new;
        gnorm = gnorm_new;
    }
    if gnorm <= tol {
        return Ok((x, SolveCertificate { method: "newton", residual: gnorm, iterations: NEWTON_ITERATION_CAP }));
    }
    Err(Error::Convergence { iterations: NEWTON_ITERATION_CAP, residual: gnorm })
}

/// Solves the normal equations on the current support with the current signs.
/// Returns `None` when the support or signs are inconsistent.
fn polish_lasso(p: &Problem, x: &Vector) -> Option<Vector> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    if support.is_empty() {
        return Some(Vector::zeros(x.len()));
    }
    let b = p.bundle();
    let a_s = select_columns(&b.design, &support);
    let gram = a_s.t().dot(&a_s);
    let signs: Vector = support.iter().map(|&i| x[i].signum()).collect();
    let rhs = a_s.t().dot(&b.target) - &signs * p.reg();
    let xs = solve_linear(&gram, &rhs).ok()?;
    if xs.iter().zip(&signs).any(|(v, s)| v * s <= 0.0) {
        return None;
    }
    let mut out = Vector::zeros(x.len());
    for (k, &i) in support.iter().enumerate() {
        out[i] = xs[k];
    }
    Some(out)
}

fn apg_reference(p: &Problem, tol: f64) -> Result<(Vector, SolveCertificate)> {
    let alpha = 1.0 / p.lipschitz();
    let n = p.dim();
    let mut x = Vector::zeros(n);
    let mut prev = x.clone();
    let mut k_restart = 0usize;
    let mut residual = f64::INFINITY;
    for it in 0..SOLVER_ITERATION_CAP {
        if it % 25 == 0 {
            residual = p.fixed_point_residual(&x, alpha)?;
            if residual <= tol {
                return Ok((x, SolveCertificate { method: "apg", residual, iterations: it }));
            }
            if residual <= 1e-6 {
                if let Some(polished) = polish_lasso(p, &x) {
                    let r = p.fixed_point_residual(&polished, alpha)?;
                    if r <= tol {
                        return Ok((
                            polished,
                            SolveCertificate { method: "apg+support-solve", residual: r, iterations: it },
                        ));
                    }
                }
            }
        }
        let beta = nesterov_shifted(it - k_restart);
        let (next, y, _) = epg_step(p, &x, &prev, alpha, beta)?;
        // gradient-mapping restart keeps the reference solve monotone-ish
        if (&y - &next).dot(&(&next - &x)) > 0.0 {
            k_restart = it;
        }
        prev = x;
        x = next;
    }
    Err(Error::Convergence { iterations: SOLVER_ITERATION_CAP, residual })
}

/// Runs APG from zero and returns the first iterate inside the closed ball of
/// the given radius around `x_star`.
pub fn warm_start(p: &Problem, x_star: &Vector, radius: f64) -> Result<Vector> {
    if !(radius > 0.0) {
        return Err(Error::Parameter(format!("warm-start radius must be positive, got {radius}")));
    }
    if x_star.len() != p.dim() {
        return Err(Error::Dimension("x_star does not match problem dimension".into()));
    }
    let alpha = 1.0 / p.lipschitz();
    let mut x = Vector::zeros(p.dim());
    let mut prev = x.clone();
    for it in 0..SOLVER_ITERATION_CAP {
        let dist = norm_of(&(&x - x_star));
        if dist <= radius {
            return Ok(x);
        }
        let (next, _, _) = epg_step(p, &x, &prev, alpha, nesterov_shifted(it))?;
        prev = x;
        x = next;
    }
    Err(Error::Convergence { iterations: SOLVER_ITERATION_CAP, residual: norm_of(&(&x - x_star)) })
}
