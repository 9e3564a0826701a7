use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kclust_core::concentration::{describe, BenchConfig};
use kclust_core::kernel::gram_matrix;
use kclust_core::kmeans::{exhaustive_balanced_capped, lloyd_balanced_with, DEFAULT_EXHAUSTIVE_CAP, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use kclust_core::metrics::{misclassification, overlap_matrix, overlap_similarity};
use kclust_core::model::sample_dataset;
use kclust_core::rounding::{round_and_certify, DEFAULT_ETA};
use kclust_core::sdp::{inf_to_one_norm_exact, inf_to_one_norm_lower, solve_sdp, SdpOptions, DEFAULT_NORM_CAP};
use kclust_core::thresholds::thresholds;
use kclust_core::{rng, ModelParams};
use kclust_sim::config::SweepConfig;
use kclust_sim::io::{read_dataset, read_matrix, sidecar_path, write_dataset, write_json, write_matrix};
use kclust_sim::summarize::{gnuplot_data, gnuplot_script, summarize, write_curves_csv};
use kclust_sim::{bench, sweep, worker_count, InvalidConfig, WORKERS_ENV};
use serde_json::json;

/// Exponential-kernel clustering of planted Gaussian mixtures.
///
/// Matrix files ending in `.csv` are CSV; any other extension selects the
/// little-endian binary layout (u64 rows, u64 cols, row-major f64).
/// Datasets carry a JSON sidecar at `<path>.json`. All logarithms are
/// natural.
#[derive(Parser)]
#[command(name = "kclust", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a planted dataset.
    Gen(GenArgs),
    /// Build the kernel matrix K = exp(G/p) of a dataset.
    Kernel {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximise the kernel k-means objective.
    Kmeans(KmeansArgs),
    /// Solve the SDP relaxation, optionally rounding the solution.
    Sdp(SdpArgs),
    /// inf -> 1 operator norm of a matrix.
    Norm(NormArgs),
    /// Closed-form recovery thresholds in rho.
    Thresholds {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha: f64,
        /// Constant of the SDP threshold.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Monte Carlo concentration bench.
    Bench(BenchArgs),
    /// Phase-transition sweep from a JSON config.
    Sweep(SweepArgs),
    /// Phase table from a sweep CSV.
    Summarize(SummarizeArgs),
    /// Configuration helpers.
    Config {
        /// Print the default configuration as JSON.
        #[arg(long)]
        dump_defaults: bool,
        #[arg(long, value_enum, default_value_t = ConfigKind::Sweep)]
        kind: ConfigKind,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KmeansMethod {
    Exhaustive,
    Lloyd,
}

#[derive(Args)]
struct KmeansArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = KmeansMethod::Lloyd)]
    method: KmeansMethod,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest m accepted by the exhaustive search.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    cap: usize,
}

#[derive(Args)]
struct SdpArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Bound on ||X - Z||_F required before stopping; 0 disables it.
    #[arg(long, default_value_t = 1e-5)]
    feas_tol: f64,
    /// Solution matrix; the convergence record goes to `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Round with k-medians and report the error certificate.
    #[arg(long)]
    round: bool,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, conflicts_with = "heuristic")]
    exact: bool,
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest size enumerated by --exact.
    #[arg(long, default_value_t = DEFAULT_NORM_CAP)]
    cap: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON bench config or a list of {k, p, alpha, rho} cells.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Constant of the SDP threshold.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Phase table as JSON (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Writes `<prefix>.dat`, `<prefix>.gp` and `<prefix>.curves.csv`.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigKind {
    Sweep,
    Bench,
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn with_ext(prefix: &std::path::Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Gen(a) => {
            let params = ModelParams::new(a.k, a.p, a.alpha, a.rho, a.seed);
            params.validate().map_err(|e| InvalidConfig(e.to_string()))?;
            let ds = sample_dataset(&params)?;
            write_dataset(&a.out, &ds)?;
            print_json(&json!({ "points": a.out, "sidecar": sidecar_path(&a.out), "m": ds.m(), "p": ds.p() }))?;
        }
        Cmd::Kernel { input, out } => {
            let ds = read_dataset(&input)?;
            let km = gram_matrix(&ds);
            write_matrix(&out, &km.k)?;
            print_json(&json!({
                "m": ds.m(),
                "tau": km.tau,
                "kappa": km.kappa,
                "gamma_max": km.gamma_max,
                "gamma_min": km.gamma_min,
            }))?;
        }
        Cmd::Kmeans(a) => {
            let ds = read_dataset(&a.input)?;
            let km = gram_matrix(&ds);
            let k = ds.params.k;
            let rep = match a.method {
                KmeansMethod::Exhaustive => exhaustive_balanced_capped(&km.k, k, a.cap)?,
                KmeansMethod::Lloyd => {
                    let mut r = rng::stream(a.seed, &[]);
                    lloyd_balanced_with(&km.k, k, a.restarts, a.max_iter, &mut r)?
                }
            };
            let err = misclassification(&rep.best_partition, &ds.truth)?;
            print_json(&json!({
                "method": rep.method,
                "objective": rep.best_objective,
                "err_vs_truth": err,
                "beta_fro2": overlap_similarity(&overlap_matrix(&rep.best_partition, &ds.truth)?),
                "iterations": rep.iterations,
                "restarts_used": rep.restarts_used,
                "labels": rep.best_partition.labels(),
            }))?;
        }
        Cmd::Sdp(a) => {
            let ds = read_dataset(&a.input)?;
            let km = gram_matrix(&ds);
            let feas_tol = if a.feas_tol > 0.0 { Some(a.feas_tol) } else { None };
            let opts = SdpOptions { tol: a.tol, max_iter: a.max_iter, feas_tol, ..SdpOptions::default() };
            let sol = solve_sdp(&km.k, ds.params.k, &opts)?;
            let mut report = json!({
                "converged": sol.converged,
                "iterations": sol.iterations,
                "primal_residual": sol.primal_residual,
                "dual_residual": sol.dual_residual,
                "objective": sol.objective,
                "feasibility": sol.feasibility,
                "lambda_min": sol.lambda_min,
                "final_penalty": sol.final_penalty,
            });
            if let Some(out) = &a.out {
                write_matrix(out, &sol.x_hat)?;
                write_json(&sidecar_path(out), &report)?;
            }
            if a.round {
                let mut r = rng::stream(a.seed, &[]);
                let rep = round_and_certify(&sol.x_hat, &ds.truth, a.eta, &mut r)?;
                let obj = report.as_object_mut().expect("object");
                obj.insert("eta".into(), json!(rep.eta));
                obj.insert("l1_gap".into(), json!(rep.l1_gap));
                obj.insert("certified_err_bound".into(), json!(rep.certified_err_bound));
                obj.insert("certified_recovery".into(), json!(rep.certified_recovery));
                obj.insert("err_vs_truth".into(), json!(rep.actual_err));
                obj.insert("unbalanced_err".into(), json!(rep.unbalanced_err));
                obj.insert("kmedians_cost".into(), json!(rep.kmedians_cost));
                obj.insert("labels".into(), json!(rep.partition.labels()));
            }
            print_json(&report)?;
        }
        Cmd::Norm(a) => {
            let mat = read_matrix(&a.input)?;
            let est = if a.heuristic {
                let mut r = rng::stream(a.seed, &[]);
                inf_to_one_norm_lower(&mat, a.restarts, &mut r)
            } else {
                inf_to_one_norm_exact(&mat, a.cap)?
            };
            print_json(&est)?;
        }
        Cmd::Thresholds { k, alpha, c } => {
            let t = thresholds(k, alpha, c).map_err(|e| InvalidConfig(e.to_string()))?;
            print_json(&t)?;
        }
        Cmd::Bench(a) => {
            let mut cfg = match &a.grid {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| InvalidConfig(format!("{}: {e}", path.display())))?;
                    bench::parse_grid(&text)?
                }
                None => BenchConfig::default(),
            };
            if let Some(t) = a.trials {
                cfg.trials = t;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            bench::validate(&cfg)?;
            let workers = worker_count(a.workers)?;
            let out = bench::run_bench(&cfg, workers)?;
            bench::write_bench(&a.out, &out)?;
            for s in &out.summaries {
                eprintln!("{}", describe(s));
            }
            print_json(&out.summaries)?;
        }
        Cmd::Sweep(a) => {
            let mut cfg = SweepConfig::load(&a.config)?;
            if let Some(out) = a.out {
                cfg.output = out;
            }
            let workers = worker_count(a.workers)?;
            let out = sweep::run_sweep(&cfg, workers)?;
            eprintln!("{} rows written to {} ({} failed)", out.rows.len(), cfg.output.display(), out.failures);
            if out.failures > 0 {
                return Ok(ExitCode::from(3));
            }
        }
        Cmd::Summarize(a) => {
            let rows = sweep::read_rows(&a.input)?;
            let entries = summarize(&rows, a.c)?;
            match &a.out {
                Some(p) => write_json(p, &entries)?,
                None => print_json(&entries)?,
            }
            if let Some(prefix) = &a.plot {
                let dat = with_ext(prefix, ".dat");
                std::fs::write(&dat, gnuplot_data(&entries)).with_context(|| format!("writing {}", dat.display()))?;
                let name = dat.file_name().and_then(|n| n.to_str()).unwrap_or("phase.dat");
                std::fs::write(with_ext(prefix, ".gp"), gnuplot_script(name, &entries))?;
                let f = std::fs::File::create(with_ext(prefix, ".curves.csv"))?;
                write_curves_csv(f, &entries)?;
            }
            for e in &entries {
                eprintln!("{} k={} p={} alpha={}: rho50 = {:.4} ({:?})", e.method.name(), e.k, e.p, e.alpha, e.rho50, e.flag);
            }
        }
        Cmd::Config { dump_defaults, kind } => {
            if !dump_defaults {
                bail!("nothing to do; pass --dump-defaults");
            }
            match kind {
                ConfigKind::Sweep => print_json(&SweepConfig::default())?,
                ConfigKind::Bench => print_json(&BenchConfig::default())?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InvalidConfig>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
