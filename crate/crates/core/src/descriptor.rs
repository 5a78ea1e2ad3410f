//! Textual descriptors for recursion sequences, as accepted by the
//! `recursion-demo` subcommand.
//!
//! ```text
//! zero                 0
//! const:v              v·I        (vector: v·1)
//! geom:c:q             c·q^k·I    (vector: c·q^k·1)
//! diag:v1,v2,...       diag(v)    (vector: v)
//! file:path            row k of a CSV file, row-major; the last row repeats
//! ```

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::recursion::{estimate_rate, run_affine_limit, RateEstimate, DEFAULT_TAIL_FRACTION};

#[derive(Debug, Clone, PartialEq)]
pub enum Descriptor {
    Zero,
    Const(f64),
    Geometric { scale: f64, ratio: f64 },
    Diag(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

fn parse_f64(s: &str, whole: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Descriptor(whole.to_string()))
}

impl Descriptor {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.is_empty() {
            return Err(Error::Descriptor(String::new()));
        }
        let (head, rest) = t.split_once(':').unwrap_or((t, ""));
        match head {
            "zero" if rest.is_empty() => Ok(Descriptor::Zero),
            "const" => Ok(Descriptor::Const(parse_f64(rest, t)?)),
            "geom" => {
                let (c, q) = rest.split_once(':').ok_or_else(|| Error::Descriptor(t.to_string()))?;
                let ratio = parse_f64(q, t)?;
                if !(ratio.abs() < 1.0) {
                    return Err(Error::Descriptor(t.to_string()));
                }
                Ok(Descriptor::Geometric { scale: parse_f64(c, t)?, ratio })
            }
            "diag" => {
                let v = rest.split(',').map(|x| parse_f64(x, t)).collect::<Result<Vec<_>>>()?;
                Ok(Descriptor::Diag(v))
            }
            "file" if !rest.is_empty() => Self::from_file(Path::new(rest)),
            _ => Err(Error::Descriptor(t.to_string())),
        }
    }

    fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Ingestion { line: i + 1, message: e.to_string() })?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Descriptor(format!("file:{}", path.display())));
        }
        Ok(Descriptor::Rows(rows))
    }

    fn row(&self, k: usize) -> Option<&[f64]> {
        match self {
            Descriptor::Rows(rows) => Some(&rows[k.min(rows.len() - 1)]),
            _ => None,
        }
    }

    pub fn matrix_at(&self, k: usize, n: usize) -> Result<Matrix> {
        Ok(match self {
            Descriptor::Zero => Matrix::zeros((n, n)),
            Descriptor::Const(v) => Matrix::eye(n) * *v,
            Descriptor::Geometric { scale, ratio } => Matrix::eye(n) * (scale * ratio.powi(k as i32)),
            Descriptor::Diag(v) => {
                if v.len() != n {
                    return Err(Error::Dimension(format!("diag descriptor has {} entries, dimension is {n}", v.len())));
                }
                Matrix::from_diag(&Vector::from(v.clone()))
            }
            Descriptor::Rows(_) => {
                let row = self.row(k).unwrap();
                if row.len() != n * n {
                    return Err(Error::Dimension(format!("file row has {} entries, expected {}", row.len(), n * n)));
                }
                Matrix::from_shape_vec((n, n), row.to_vec()).expect("length checked")
            }
        })
    }

    pub fn vector_at(&self, k: usize, n: usize) -> Result<Vector> {
        Ok(match self {
            Descriptor::Zero => Vector::zeros(n),
            Descriptor::Const(v) => Vector::from_elem(n, *v),
            Descriptor::Geometric { scale, ratio } => Vector::from_elem(n, scale * ratio.powi(k as i32)),
            Descriptor::Diag(v) => {
                if v.len() != n {
                    return Err(Error::Dimension(format!("diag descriptor has {} entries, dimension is {n}", v.len())));
                }
                Vector::from(v.clone())
            }
            Descriptor::Rows(_) => {
                let row = self.row(k).unwrap();
                if row.len() != n {
                    return Err(Error::Dimension(format!("file row has {} entries, expected {n}", row.len())));
                }
                Vector::from(row.to_vec())
            }
        })
    }

    /// Value as `k → ∞`: geometric terms vanish, files settle on their last row.
    pub fn matrix_limit(&self, n: usize) -> Result<Matrix> {
        match self {
            Descriptor::Geometric { .. } => Ok(Matrix::zeros((n, n))),
            Descriptor::Rows(rows) => self.matrix_at(rows.len() - 1, n),
            _ => self.matrix_at(0, n),
        }
    }

    pub fn vector_limit(&self, n: usize) -> Result<Vector> {
        match self {
            Descriptor::Geometric { .. } => Ok(Vector::zeros(n)),
            Descriptor::Rows(rows) => self.vector_at(rows.len() - 1, n),
            _ => self.vector_at(0, n),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub dim: usize,
    pub horizon: usize,
    /// Fixed point of the limiting affine map `x ↦ (B + C) x + d`.
    pub limit: Vec<f64>,
    pub limit_radius: f64,
    pub initial_error: f64,
    pub final_error: f64,
    pub rate: Option<RateEstimate>,
    /// `‖x_k − limit‖`, `k = 0..=horizon`.
    #[serde(skip)]
    pub errors: Vec<f64>,
}

/// Runs `x_{k+1} = (B_k + C_k) x_k + d_k` and measures the distance to the
/// fixed point of the limiting map.
pub fn run_demo(b: &Descriptor, c: &Descriptor, d: &Descriptor, e0: &Vector, horizon: usize) -> Result<DemoReport> {
    let n = e0.len();
    // surface shape errors before entering the infallible callbacks
    for k in [0, horizon] {
        b.matrix_at(k, n)?;
        c.matrix_at(k, n)?;
        d.vector_at(k, n)?;
    }
    let b_limit = b.matrix_limit(n)? + c.matrix_limit(n)?;
    let d_limit = d.vector_limit(n)?;
    let b_seq = |k: usize| b.matrix_at(k, n).unwrap() + c.matrix_at(k, n).unwrap();
    let d_seq = |k: usize| d.vector_at(k, n).unwrap();
    let run = run_affine_limit(&b_seq, &b_limit, &d_seq, &d_limit, e0, horizon)?;
    let errors: Vec<f64> = run.trace.iter().map(|x| crate::linalg::norm_of(&(x - &run.limit))).collect();
    Ok(DemoReport {
        dim: n,
        horizon,
        limit: run.limit.to_vec(),
        limit_radius: run.limit_radius.radius,
        initial_error: errors[0],
        final_error: errors[horizon],
        rate: estimate_rate(&errors, DEFAULT_TAIL_FRACTION).ok(),
        errors,
    })
}
