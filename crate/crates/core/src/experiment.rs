//! Multi-instance sweep: every variant is run with unrolled derivatives from a
//! warm start, and both error curves are compared against the implicit
//! derivative at the reference solution.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{generate_lasso, generate_logistic, generate_quad, load_dataset_csv, Dataset, GeneratedInstance};
use crate::implicit::implicit_jvp_pgd;
use crate::linalg::{norm_of, Vector};
use crate::problems::ProblemKind;
use crate::recursion::{estimate_rate_above, RateEstimate, DEFAULT_TAIL_FRACTION};
use crate::solver::{identification_index, warm_start, Schedule, StepRegime};
use crate::svg::{render_log_panels, Panel, Series};
use crate::unroll::{unroll_from, JvpTrace};

/// Rate fits ignore entries below this multiple of `max(1, ‖reference‖)`.
pub const FIT_FLOOR_REL: f64 = 1e-10;
/// A run counts as converged once `‖x_K − x*‖ ≤ CONVERGED_REL · (1 + ‖x*‖)`.
pub const CONVERGED_REL: f64 = 1e-8;
/// Regeneration attempts per instance slot before giving up.
pub const MAX_REGENERATIONS: usize = 20;
pub const QUAD_SMOKE_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentProblem {
    Lasso,
    Logistic,
    /// Small strongly convex quadratic, for smoke runs.
    Quad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PgdFixed,
    PgdRandLow,
    PgdRandMid,
    PgdRandHigh,
    Apg,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::PgdFixed, Variant::PgdRandLow, Variant::PgdRandMid, Variant::PgdRandHigh, Variant::Apg];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PgdFixed => "pgd_fixed",
            Variant::PgdRandLow => "pgd_rand_low",
            Variant::PgdRandMid => "pgd_rand_mid",
            Variant::PgdRandHigh => "pgd_rand_high",
            Variant::Apg => "apg",
        }
    }

    /// Position in [`Variant::ALL`]; also the tag mixed into the schedule seed.
    pub fn index(self) -> u64 {
        Variant::ALL.iter().position(|&v| v == self).unwrap() as u64
    }

    /// Step/momentum schedule for this variant on a problem with constants `L`, `μ`.
    pub fn schedule(self, kind: ProblemKind, lipschitz: f64, strong_convexity: f64, seed: u64) -> Schedule {
        match self {
            Variant::PgdFixed => {
                let alpha = match kind {
                    ProblemKind::LassoL1 => 1.0 / lipschitz,
                    _ => 2.0 / (lipschitz + strong_convexity),
                };
                Schedule::fixed(alpha)
            }
            Variant::PgdRandLow => Schedule::random(StepRegime::Low, lipschitz, seed),
            Variant::PgdRandMid => Schedule::random(StepRegime::Mid, lipschitz, seed),
            Variant::PgdRandHigh => Schedule::random(StepRegime::High, lipschitz, seed),
            Variant::Apg => Schedule::accelerated(1.0 / lipschitz),
        }
    }
}

fn default_instances() -> usize {
    50
}

fn default_warm_radius() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ExperimentProblem,
    pub variants: Vec<Variant>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    #[serde(default = "default_warm_radius")]
    pub warm_radius: f64,
    pub output_dir: PathBuf,
    /// Worker pool width; `None` uses all available cores.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Optional dataset CSV for the logistic problem.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem: ExperimentProblem, k: usize, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            problem,
            variants: Variant::ALL.to_vec(),
            instances: default_instances(),
            k,
            seed,
            warm_radius: default_warm_radius(),
            output_dir: output_dir.into(),
            workers: None,
            dataset: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances < 1 {
            return Err(Error::Parameter("instances must be at least 1".into()));
        }
        if self.k < 10 {
            return Err(Error::Parameter(format!("K must be at least 10, got {}", self.k)));
        }
        if !(self.warm_radius > 0.0) {
            return Err(Error::Parameter(format!("warm_radius must be positive, got {}", self.warm_radius)));
        }
        if self.variants.is_empty() {
            return Err(Error::Parameter("at least one variant is required".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Parameter("workers must be positive".into()));
        }
        if self.dataset.is_some() && self.problem != ExperimentProblem::Logistic {
            return Err(Error::Parameter("a dataset can only be supplied for the logistic problem".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; mixes a base seed with small tags into independent streams.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base;
    for &t in tags {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(t);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

pub fn generate_instance(
    problem: ExperimentProblem,
    seed: u64,
    dataset: Option<&Dataset>,
) -> Result<GeneratedInstance> {
    match problem {
        ExperimentProblem::Lasso => generate_lasso(seed),
        ExperimentProblem::Logistic => generate_logistic(seed, dataset),
        ExperimentProblem::Quad => generate_quad(seed, QUAD_SMOKE_DIM),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantRun {
    pub variant: Variant,
    pub primal_errors: Vec<f64>,
    pub deriv_errors: Vec<f64>,
    pub primal_rate: Option<RateEstimate>,
    pub deriv_rate: Option<RateEstimate>,
    /// `‖ẋ_K − Dψ·u̇‖ / (1 + ‖Dψ·u̇‖)`.
    pub final_deriv_rel: f64,
    pub converged: bool,
    /// First iteration from which the support stays equal to that of `x*`.
    pub identification: Option<usize>,
    pub kink_hits: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceOutcome {
    pub seed: u64,
    /// Assumption-failing draws and discarded instances before this one.
    pub regenerated: usize,
    pub lipschitz: f64,
    pub strong_convexity: f64,
    pub support_size: usize,
    pub nd_margin: f64,
    pub rpd_margin: f64,
    pub x_star_norm: f64,
    pub dpsi_norm: f64,
    pub runs: Vec<VariantRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub primal_median: Vec<f64>,
    pub deriv_median: Vec<f64>,
    pub primal_rate: Option<RateEstimate>,
    pub deriv_rate: Option<RateEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub summaries: Vec<VariantSummary>,
    pub instances: Vec<InstanceOutcome>,
    /// Instances whose assumptions held on the first draw.
    pub assumption_passes: usize,
    pub regenerated: usize,
}

fn fit_floor(reference_norm: f64) -> f64 {
    FIT_FLOOR_REL * reference_norm.max(1.0)
}

fn fit(errors: &[f64], reference_norm: f64) -> Option<RateEstimate> {
    estimate_rate_above(errors, DEFAULT_TAIL_FRACTION, fit_floor(reference_norm)).ok()
}

fn run_variant(g: &GeneratedInstance, x0: &Vector, dpsi: &Vector, variant: Variant, k: usize) -> Result<VariantRun> {
    let p = &g.problem;
    let sched =
        variant.schedule(p.kind(), p.lipschitz(), p.strong_convexity(), derive_seed(g.seed, &[variant.index()]));
    let trace: JvpTrace = unroll_from(p, x0, &Vector::zeros(p.dim()), &sched, &g.direction, k)?;
    let primal_errors = trace.primal_errors(&g.x_star);
    let deriv_errors = trace.derivative_errors(dpsi);
    let x_norm = norm_of(&g.x_star);
    let d_norm = norm_of(dpsi);
    let identification = match p.kind() {
        ProblemKind::LassoL1 => identification_index(&trace.primal.iterates, &g.x_star),
        _ => Some(0),
    };
    Ok(VariantRun {
        variant,
        primal_rate: fit(&primal_errors, x_norm),
        deriv_rate: fit(&deriv_errors, d_norm),
        final_deriv_rel: deriv_errors[k] / (1.0 + d_norm),
        converged: primal_errors[k] <= CONVERGED_REL * (1.0 + x_norm),
        identification,
        kink_hits: trace.kink_hits.iter().sum(),
        primal_errors,
        deriv_errors,
    })
}

/// Generates instance slot `index`, regenerating on assumption failures, and
/// runs every variant on it.
pub fn run_instance(cfg: &ExperimentConfig, index: usize, dataset: Option<&Dataset>) -> Result<InstanceOutcome> {
    let mut regenerated = 0;
    for attempt in 0..MAX_REGENERATIONS {
        let seed = derive_seed(cfg.seed, &[index as u64, attempt as u64]);
        let g = match generate_instance(cfg.problem, seed, dataset) {
            Ok(g) => g,
            Err(Error::Generation { attempts, .. }) => {
                regenerated += attempts;
                continue;
            }
            Err(e) => return Err(Error::Instance { seed, source: Box::new(e) }),
        };
        regenerated += g.attempts - 1;
        let p = &g.problem;
        let truth = match implicit_jvp_pgd(p, &g.x_star, 1.0 / p.lipschitz(), &g.direction) {
            Ok(t) => t,
            Err(Error::Assumption(_) | Error::Contraction { .. }) => {
                regenerated += 1;
                continue;
            }
            Err(e) => return Err(Error::Instance { seed, source: Box::new(e) }),
        };
        let wrap = |e| Error::Instance { seed, source: Box::new(e) };
        let x0 = warm_start(p, &g.x_star, cfg.warm_radius).map_err(wrap)?;
        let runs = cfg
            .variants
            .iter()
            .map(|&v| run_variant(&g, &x0, &truth.dpsi_dot, v, cfg.k))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        return Ok(InstanceOutcome {
            seed,
            regenerated,
            lipschitz: p.lipschitz(),
            strong_convexity: p.strong_convexity(),
            support_size: g.assumptions.support_size,
            nd_margin: g.assumptions.nd_margin,
            rpd_margin: g.assumptions.rpd_margin,
            x_star_norm: norm_of(&g.x_star),
            dpsi_norm: norm_of(&truth.dpsi_dot),
            runs,
        });
    }
    Err(Error::Generation { attempts: MAX_REGENERATIONS, seed: derive_seed(cfg.seed, &[index as u64]) })
}

/// Pointwise median over equally long curves.
pub fn pointwise_median(curves: &[&[f64]]) -> Vec<f64> {
    let len = curves.first().map(|c| c.len()).unwrap_or(0);
    let mut col = Vec::with_capacity(curves.len());
    (0..len)
        .map(|k| {
            col.clear();
            col.extend(curves.iter().map(|c| c[k]));
            col.sort_by(f64::total_cmp);
            let m = col.len();
            if m % 2 == 1 {
                col[m / 2]
            } else {
                0.5 * (col[m / 2 - 1] + col[m / 2])
            }
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Runs the sweep and aggregates the median curves; writes nothing.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let dataset = cfg.dataset.as_deref().map(load_dataset_csv).transpose()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::Parameter(format!("worker pool: {e}")))?;
    let instances: Vec<InstanceOutcome> = pool.install(|| {
        (0..cfg.instances).into_par_iter().map(|i| run_instance(cfg, i, dataset.as_ref())).collect::<Result<Vec<_>>>()
    })?;

    let mut x_norms: Vec<f64> = instances.iter().map(|o| o.x_star_norm).collect();
    let mut d_norms: Vec<f64> = instances.iter().map(|o| o.dpsi_norm).collect();
    let (x_med, d_med) = (median(&mut x_norms), median(&mut d_norms));
    let summaries = cfg
        .variants
        .iter()
        .enumerate()
        .map(|(vi, &variant)| {
            let primal: Vec<&[f64]> = instances.iter().map(|o| o.runs[vi].primal_errors.as_slice()).collect();
            let deriv: Vec<&[f64]> = instances.iter().map(|o| o.runs[vi].deriv_errors.as_slice()).collect();
            let primal_median = pointwise_median(&primal);
            let deriv_median = pointwise_median(&deriv);
            VariantSummary {
                variant,
                primal_rate: fit(&primal_median, x_med),
                deriv_rate: fit(&deriv_median, d_med),
                primal_median,
                deriv_median,
            }
        })
        .collect();
    let assumption_passes = instances.iter().filter(|o| o.regenerated == 0).count();
    let regenerated = instances.iter().map(|o| o.regenerated).sum();
    Ok(ExperimentResult { config: cfg.clone(), summaries, instances, assumption_passes, regenerated })
}

fn fmt_rate(r: &Option<RateEstimate>) -> String {
    r.map(|r| format!("{:e}", r.rate)).unwrap_or_else(|| "nan".into())
}

/// Writes `errors_<variant>.csv`, `rates.csv`, `figure1.svg` and `summary.json`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in &result.summaries {
        let mut out = BufWriter::new(fs::File::create(dir.join(format!("errors_{}.csv", s.variant.name())))?);
        writeln!(out, "k,primal_median,deriv_median")?;
        for (k, (p, d)) in s.primal_median.iter().zip(&s.deriv_median).enumerate() {
            writeln!(out, "{k},{p:e},{d:e}")?;
        }
        out.flush()?;
    }
    let mut out = BufWriter::new(fs::File::create(dir.join("rates.csv"))?);
    writeln!(out, "variant,primal_rate,deriv_rate,residual")?;
    for s in &result.summaries {
        let residual = match (s.primal_rate, s.deriv_rate) {
            (Some(a), Some(b)) => format!("{:e}", a.residual.max(b.residual)),
            _ => "nan".into(),
        };
        writeln!(out, "{},{},{},{residual}", s.variant.name(), fmt_rate(&s.primal_rate), fmt_rate(&s.deriv_rate))?;
    }
    out.flush()?;

    let svg = render_figure(result);
    fs::write(dir.join("figure1.svg"), svg)?;
    let summary = serde_json::json!({
        "config": result.config,
        "assumption_passes": result.assumption_passes,
        "regenerated": result.regenerated,
        "rates": result.summaries.iter().map(|s| serde_json::json!({
            "variant": s.variant,
            "primal": s.primal_rate,
            "deriv": s.deriv_rate,
        })).collect::<Vec<_>>(),
        "instances": result.instances.iter().map(|o| serde_json::json!({
            "seed": o.seed,
            "regenerated": o.regenerated,
            "lipschitz": o.lipschitz,
            "support_size": o.support_size,
            "nd_margin": o.nd_margin,
            "runs": o.runs.iter().map(|r| serde_json::json!({
                "variant": r.variant,
                "primal_rate": r.primal_rate.map(|x| x.rate),
                "deriv_rate": r.deriv_rate.map(|x| x.rate),
                "final_deriv_rel": r.final_deriv_rel,
                "converged": r.converged,
                "identification": r.identification,
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

pub fn render_figure(result: &ExperimentResult) -> String {
    let primal = Panel {
        title: "median ‖x_k − x*‖",
        series: result.summaries.iter().map(|s| Series { label: s.variant.name(), values: &s.primal_median }).collect(),
    };
    let deriv = Panel {
        title: "median ‖ẋ_k − Dψ·u̇‖",
        series: result.summaries.iter().map(|s| Series { label: s.variant.name(), values: &s.deriv_median }).collect(),
    };
    render_log_panels(&[primal, deriv], "iteration k")
}

/// [`run_sweep`] followed by [`write_outputs`] into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let result = run_sweep(cfg)?;
    write_outputs(&result, &cfg.output_dir)?;
    Ok(result)
}
