use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unrolldiff::descriptor::{run_demo, Descriptor};
use unrolldiff::experiment::{
    derive_seed, generate_instance, run_experiment, ExperimentConfig, ExperimentProblem, Variant,
};
use unrolldiff::finite_diff::{fd_solution_map_sweep, fd_solver_map_sweep};
use unrolldiff::generate::{load_dataset_csv, GeneratedInstance, REFERENCE_TOL};
use unrolldiff::linalg::{norm_of, Vector};
use unrolldiff::recursion::write_error_csv;
use unrolldiff::{implicit_jvp_apg, implicit_jvp_pgd, run_epg, unroll_from, warm_start, Error, Result};

#[derive(Parser)]
#[command(name = "unrolldiff", version, about = "Unrolled and implicit differentiation of proximal gradient methods")]
struct Cli {
    /// Seed for instance generation and random step sizes
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or directory for `experiment` / `recursion-demo`); stdout if omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Lasso,
    Logistic,
    Quad,
}

impl From<ProblemArg> for ExperimentProblem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Lasso => ExperimentProblem::Lasso,
            ProblemArg::Logistic => ExperimentProblem::Logistic,
            ProblemArg::Quad => ExperimentProblem::Quad,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    PgdFixed,
    PgdRandLow,
    PgdRandMid,
    PgdRandHigh,
    Apg,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::PgdFixed => Variant::PgdFixed,
            VariantArg::PgdRandLow => Variant::PgdRandLow,
            VariantArg::PgdRandMid => Variant::PgdRandMid,
            VariantArg::PgdRandHigh => Variant::PgdRandHigh,
            VariantArg::Apg => Variant::Apg,
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, value_enum, default_value = "lasso")]
    problem: ProblemArg,
    /// Numeric CSV (label in last column) replacing the synthetic logistic data
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum, default_value = "pgd-fixed")]
    variant: VariantArg,
    #[arg(short = 'K', long, default_value_t = 3000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-2)]
    warm_radius: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a problem instance and parameter direction; prints JSON
    Generate(InstanceArgs),
    /// Run one solver variant from a warm start; CSV `k,error,alpha_k,beta_k`
    Solve(RunArgs),
    /// Forward-mode derivative of the iterates; CSV `k,primal_error,derivative_error`
    DiffUnroll(RunArgs),
    /// Implicit derivative of the solution map; prints JSON
    DiffImplicit {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Step size as a multiple of 1/L
        #[arg(long, default_value_t = 1.0)]
        alpha_scale: f64,
        /// Use the doubled APG system with this momentum
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Central finite differences against the unrolled (or implicit) derivative; prints JSON
    DiffFd {
        #[command(flatten)]
        run: RunArgs,
        /// Difference the solution map instead of the K-step solver map
        #[arg(long)]
        solution_map: bool,
    },
    /// Multi-instance sweep writing median curves, rates and a figure
    Experiment {
        #[arg(long, value_enum)]
        problem: Option<ProblemArg>,
        #[arg(long, value_enum, value_delimiter = ',')]
        variants: Option<Vec<VariantArg>>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(short = 'K', long)]
        iterations: Option<usize>,
        #[arg(long)]
        warm_radius: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Linear recursion x_{k+1} = (B_k + C_k) x_k + d_k from sequence descriptors
    ///
    /// Descriptors: zero | const:v | geom:c:q | diag:v1,v2,.. | file:path
    RecursionDemo {
        #[arg(long, value_parser = parse_descriptor)]
        b: Descriptor,
        #[arg(long, value_parser = parse_descriptor, default_value = "zero")]
        c: Descriptor,
        #[arg(long, value_parser = parse_descriptor, default_value = "zero")]
        d: Descriptor,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Comma-separated initial vector (default: all ones)
        #[arg(long, value_delimiter = ',')]
        e0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 300)]
        horizon: usize,
    },
}

fn parse_descriptor(s: &str) -> std::result::Result<Descriptor, String> {
    Descriptor::parse(s).map_err(|e| e.to_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn instance(args: &InstanceArgs, seed: u64) -> Result<GeneratedInstance> {
    let dataset = args.dataset.as_deref().map(load_dataset_csv).transpose()?;
    generate_instance(args.problem.into(), seed, dataset.as_ref())
}

struct Prepared {
    g: GeneratedInstance,
    x0: Vector,
    sched: unrolldiff::Schedule,
}

fn prepare(args: &RunArgs, seed: u64) -> Result<Prepared> {
    let g = instance(&args.instance, seed)?;
    let p = &g.problem;
    let variant: Variant = args.variant.into();
    let sched = variant.schedule(p.kind(), p.lipschitz(), p.strong_convexity(), derive_seed(seed, &[1]));
    let x0 = warm_start(p, &g.x_star, args.warm_radius)?;
    Ok(Prepared { g, x0, sched })
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Generate(args) => {
            let g = instance(&args, seed)?;
            emit(out, &(serde_json::to_string_pretty(&g)? + "\n"))
        }
        Command::Solve(args) => {
            let pr = prepare(&args, seed)?;
            let mut trace = run_epg(&pr.g.problem, &pr.x0, &pr.sched, args.iterations)?;
            trace.attach_errors(&pr.g.x_star);
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            emit(out, &String::from_utf8_lossy(&buf))
        }
        Command::DiffUnroll(args) => {
            let pr = prepare(&args, seed)?;
            let p = &pr.g.problem;
            let truth = implicit_jvp_pgd(p, &pr.g.x_star, 1.0 / p.lipschitz(), &pr.g.direction)?;
            let t = unroll_from(p, &pr.x0, &Vector::zeros(p.dim()), &pr.sched, &pr.g.direction, args.iterations)?;
            let mut buf = Vec::new();
            t.write_csv(&mut buf, &pr.g.x_star, &truth.dpsi_dot)?;
            emit(out, &String::from_utf8_lossy(&buf))
        }
        Command::DiffImplicit { instance: args, alpha_scale, beta } => {
            let g = instance(&args, seed)?;
            let p = &g.problem;
            let alpha = alpha_scale / p.lipschitz();
            let sol = match beta {
                Some(b) => implicit_jvp_apg(p, &g.x_star, alpha, b, &g.direction)?,
                None => implicit_jvp_pgd(p, &g.x_star, alpha, &g.direction)?,
            };
            emit(out, &(serde_json::to_string_pretty(&sol)? + "\n"))
        }
        Command::DiffFd { run: args, solution_map } => {
            let pr = prepare(&args, seed)?;
            let p = &pr.g.problem;
            let du = &pr.g.direction;
            let (analytic, fd) = if solution_map {
                let truth = implicit_jvp_pgd(p, &pr.g.x_star, 1.0 / p.lipschitz(), du)?;
                (truth.dpsi_dot, fd_solution_map_sweep(p, du, REFERENCE_TOL)?)
            } else {
                let t = unroll_from(p, &pr.x0, &Vector::zeros(p.dim()), &pr.sched, du, args.iterations)?;
                // replay the exact steps on the perturbed problems
                let replay = unrolldiff::Schedule::replay(&t.primal);
                (t.last_dot().clone(), fd_solver_map_sweep(p, &pr.x0, &replay, du, args.iterations)?)
            };
            let rel = norm_of(&(&analytic - &fd.derivative)) / (1.0 + norm_of(&analytic));
            let report = serde_json::json!({
                "h": fd.h,
                "stability": fd.stability,
                "relative_error": rel,
                "analytic_norm": norm_of(&analytic),
            });
            emit(out, &(serde_json::to_string_pretty(&report)? + "\n"))
        }
        Command::Experiment { problem, variants, instances, iterations, warm_radius, workers, dataset } => {
            let mut cfg = match &cli.config {
                Some(path) => ExperimentConfig::from_json_file(path)?,
                None => {
                    let problem =
                        problem.ok_or_else(|| Error::Parameter("--problem or --config is required".into()))?;
                    ExperimentConfig::new(problem.into(), iterations.unwrap_or(3000), seed, "experiment_out")
                }
            };
            if let Some(p) = problem {
                cfg.problem = p.into();
            }
            if let Some(v) = variants {
                cfg.variants = v.into_iter().map(Variant::from).collect();
            }
            if let Some(n) = instances {
                cfg.instances = n;
            }
            if let Some(k) = iterations {
                cfg.k = k;
            }
            if let Some(r) = warm_radius {
                cfg.warm_radius = r;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if dataset.is_some() {
                cfg.dataset = dataset;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o.to_path_buf();
            }
            let res = run_experiment(&cfg)?;
            for s in &res.summaries {
                let fmt =
                    |r: &Option<unrolldiff::RateEstimate>| r.map(|r| format!("{:.4}", r.rate)).unwrap_or("n/a".into());
                println!(
                    "{:<14} primal rate {}  derivative rate {}",
                    s.variant.name(),
                    fmt(&s.primal_rate),
                    fmt(&s.deriv_rate)
                );
            }
            println!(
                "{} instances ({} passed assumptions on the first draw, {} regenerated); outputs in {}",
                res.instances.len(),
                res.assumption_passes,
                res.regenerated,
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::RecursionDemo { b, c, d, dim, e0, horizon } => {
            let e0 = match e0 {
                Some(v) => Vector::from(v),
                None => Vector::ones(dim),
            };
            let report = run_demo(&b, &c, &d, &e0, horizon)?;
            let mut csv = Vec::new();
            write_error_csv(&mut csv, &report.errors)?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            match out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("recursion.csv"), &csv)?;
                    fs::write(dir.join("report.json"), &json)?;
                    print!("{json}");
                }
                None => {
                    io::stdout().write_all(&csv)?;
                    eprint!("{json}");
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
