//! Problem instance generators and dataset ingestion.

use std::io::Read;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, Matrix, Vector};
use crate::problems::{AssumptionReport, ParamBundle, ParamDirection, Problem, ProblemKind};
use crate::solver::{reference_solve, SolveCertificate};

pub const REFERENCE_TOL: f64 = 1e-12;
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

pub const LASSO_COLS: usize = 200;
pub const LASSO_ROWS: (usize, usize) = (70, 90);
pub const LASSO_NONZEROS: usize = 50;
pub const LASSO_NOISE_VARIANCE: f64 = 1e-3;
pub const LASSO_LAMBDA_MAX: f64 = 10.0;

pub const LOGISTIC_ROWS: usize = 500;
pub const LOGISTIC_COLS: usize = 64;
pub const LOGISTIC_FLIP_PROB: f64 = 0.1;
pub const LOGISTIC_LAMBDA_VARIANCE: f64 = 1e-3;
pub const LOGISTIC_LAMBDA_FLOOR: f64 = 1e-6;
pub const LOGISTIC_DESIGN_NOISE_STD: f64 = 1e-3;
/// Seed of the shared synthetic base dataset; instances only perturb it.
pub const LOGISTIC_BASE_SEED: u64 = 0x10_915_71c;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vector,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratedInstance {
    pub problem: Problem,
    pub direction: ParamDirection,
    pub x_star: Vector,
    pub certificate: SolveCertificate,
    pub assumptions: AssumptionReport,
    pub seed: u64,
    /// Number of `λ` draws consumed before the assumptions held.
    pub attempts: usize,
}

/// Parses a numeric CSV whose last column is the label/target. A first row
/// that does not parse as numbers is treated as a header.
pub fn parse_dataset_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| Error::Ingestion { line, message: e.to_string() })?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Ingestion { line, message: "non-finite value".into() });
                }
                if let Some(first) = rows.first() {
                    if first.len() != vals.len() {
                        return Err(Error::Ingestion {
                            line,
                            message: format!("expected {} columns, found {}", first.len(), vals.len()),
                        });
                    }
                }
                if vals.len() < 2 {
                    return Err(Error::Ingestion { line, message: "need at least one feature and a label".into() });
                }
                rows.push(vals);
            }
            Err(e) if line == 1 => {
                let _ = e; // header row
            }
            Err(e) => return Err(Error::Ingestion { line, message: e.to_string() }),
        }
    }
    if rows.is_empty() {
        return Err(Error::Ingestion { line: 0, message: "no data rows".into() });
    }
    let m = rows.len();
    let n = rows[0].len() - 1;
    let features = Matrix::from_shape_fn((m, n), |(i, j)| rows[i][j]);
    let labels: Vector = rows.iter().map(|r| r[n]).collect();
    Ok(Dataset { features, labels })
}

pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_dataset_csv(file)
}

/// Per-feature standardization to zero mean and unit (population) variance.
/// Constant columns are centred only.
pub fn standardize_columns(m: &mut Matrix) {
    let rows = m.nrows() as f64;
    for mut col in m.columns_mut() {
        let mean = col.sum() / rows;
        col.mapv_inplace(|v| v - mean);
        let var = col.dot(&col) / rows;
        if var > 0.0 {
            let sd = var.sqrt();
            col.mapv_inplace(|v| v / sd);
        }
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vector) -> Vector {
    let nv = v.dot(&v).sqrt();
    if nv > 0.0 {
        v / nv
    } else {
        v
    }
}

fn unit_sign(rng: &mut ChaCha8Rng) -> f64 {
    let g: f64 = StandardNormal.sample(rng);
    if g < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn solve_and_check(
    kind: ProblemKind,
    bundle: ParamBundle,
) -> Result<Option<(Problem, Vector, SolveCertificate, AssumptionReport)>> {
    let problem = Problem::new(kind, bundle)?;
    let (x_star, certificate) = match reference_solve(&problem, REFERENCE_TOL) {
        Ok(r) => r,
        Err(Error::Convergence { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let report = problem.check_assumptions(&x_star)?;
    Ok(report.passed().then_some((problem, x_star, certificate, report)))
}

/// Synthetic lasso: `M ∈ [70, 90]`, `N = 200`, `A ~ U(0,1)`, a planted
/// 50-sparse `x′` with standard normal entries, `b = A x′ + ε`,
/// `ε ~ N(0, 1e-3 I)`. `λ ~ U(0, 10)` is redrawn until RPD and ND hold at the
/// reference solution.
pub fn generate_lasso(seed: u64) -> Result<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(LASSO_ROWS.0..=LASSO_ROWS.1);
    let n = LASSO_COLS;
    let design = Matrix::from_shape_simple_fn((m, n), || rng.random::<f64>());
    let mut planted = Vector::zeros(n);
    for i in sample(&mut rng, n, LASSO_NONZEROS) {
        planted[i] = StandardNormal.sample(&mut rng);
    }
    let noise = Normal::new(0.0, LASSO_NOISE_VARIANCE.sqrt()).expect("valid std");
    let target = design.dot(&planted) + Vector::from_shape_simple_fn(m, || noise.sample(&mut rng));

    for attempt in 1..=MAX_GENERATION_ATTEMPTS {
        let reg = rng.random_range(0.0..LASSO_LAMBDA_MAX);
        if reg <= 0.0 {
            continue;
        }
        let bundle = ParamBundle { design: design.clone(), target: target.clone(), reg };
        if let Some((problem, x_star, certificate, assumptions)) = solve_and_check(ProblemKind::LassoL1, bundle)? {
            let d_design = gaussian_matrix(&mut rng, m, n);
            let d_design = &d_design / frobenius(&d_design);
            let d_target = unit(gaussian_vector(&mut rng, m));
            let d_reg = unit_sign(&mut rng);
            return Ok(GeneratedInstance {
                problem,
                direction: ParamDirection { d_design, d_target, d_reg },
                x_star,
                certificate,
                assumptions,
                seed,
                attempts: attempt,
            });
        }
    }
    Err(Error::Generation { attempts: MAX_GENERATION_ATTEMPTS, seed })
}

/// Standardized synthetic stand-in for a real classification dataset:
/// Gaussian features, labels from a planted linear rule with 10% flips.
pub fn synthetic_logistic_base() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(LOGISTIC_BASE_SEED);
    let mut features = gaussian_matrix(&mut rng, LOGISTIC_ROWS, LOGISTIC_COLS);
    let rule = gaussian_vector(&mut rng, LOGISTIC_COLS);
    let scores = features.dot(&rule);
    let labels: Vector = scores
        .iter()
        .map(|&s| {
            let y = if s < 0.0 { -1.0 } else { 1.0 };
            if rng.random::<f64>() < LOGISTIC_FLIP_PROB {
                -y
            } else {
                y
            }
        })
        .collect();
    standardize_columns(&mut features);
    Dataset { features, labels }
}

/// Logistic instance: the base dataset (standardized) with every design entry
/// perturbed by `N(0, 1e-6)` noise and `λ = |N(0, 1e-3)| + 1e-6`.
pub fn generate_logistic(seed: u64, dataset: Option<&Dataset>) -> Result<GeneratedInstance> {
    let base = match dataset {
        Some(d) => {
            let mut d = d.clone();
            standardize_columns(&mut d.features);
            d
        }
        None => synthetic_logistic_base(),
    };
    if let Some(bad) = base.labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::Parameter(format!("logistic labels must be ±1, found {bad}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = base.features.dim();
    let lam_dist = Normal::new(0.0, LOGISTIC_LAMBDA_VARIANCE.sqrt()).expect("valid std");
    let noise = Normal::new(0.0, LOGISTIC_DESIGN_NOISE_STD).expect("valid std");

    for attempt in 1..=MAX_GENERATION_ATTEMPTS {
        let reg = lam_dist.sample(&mut rng).abs() + LOGISTIC_LAMBDA_FLOOR;
        let design = &base.features + &Matrix::from_shape_simple_fn((m, n), || noise.sample(&mut rng));
        let bundle = ParamBundle { design, target: base.labels.clone(), reg };
        if let Some((problem, x_star, certificate, assumptions)) = solve_and_check(ProblemKind::LogisticL2, bundle)? {
            let d_design = gaussian_matrix(&mut rng, m, n);
            let d_design = &d_design / frobenius(&d_design);
            let d_reg = unit_sign(&mut rng);
            return Ok(GeneratedInstance {
                problem,
                direction: ParamDirection { d_design, d_target: Vector::zeros(m), d_reg },
                x_star,
                certificate,
                assumptions,
                seed,
                attempts: attempt,
            });
        }
    }
    Err(Error::Generation { attempts: MAX_GENERATION_ATTEMPTS, seed })
}

/// Small strongly convex quadratic for smoke runs: `Q = I + G Gᵀ/(2n)`.
pub fn generate_quad(seed: u64, n: usize) -> Result<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, n);
    let mut q = Matrix::eye(n) + g.dot(&g.t()) / (2.0 * n as f64);
    for i in 0..n {
        for j in (i + 1)..n {
            q[[j, i]] = q[[i, j]];
        }
    }
    let c = gaussian_vector(&mut rng, n);
    let bundle = ParamBundle { design: q, target: c, reg: 1.0 };
    let (problem, x_star, certificate, assumptions) =
        solve_and_check(ProblemKind::QuadToy, bundle)?.ok_or(Error::Generation { attempts: 1, seed })?;
    let d_design = gaussian_matrix(&mut rng, n, n);
    let d_design = (&d_design + &d_design.t()) / 2.0;
    let d_design = &d_design / frobenius(&d_design);
    let d_target = unit(gaussian_vector(&mut rng, n));
    Ok(GeneratedInstance {
        problem,
        direction: ParamDirection { d_design, d_target, d_reg: 0.0 },
        x_star,
        certificate,
        assumptions,
        seed,
        attempts: 1,
    })
}
