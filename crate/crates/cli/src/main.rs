use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use mixmemb::eval::{align_columns, rc_avg, relative_error_at};
use mixmemb::geonmf::{fit, FitOptions, PickRule};
use mixmemb::harness::{
    load_edge_list, load_ground_truth, read_matrix_csv, run_experiment, summarize, write_edge_list, write_matrix_csv,
    write_results, write_summary, ExperimentConfig,
};
use mixmemb::model::{build_b, plant_pure_nodes, sample_adjacency_from_params, sample_theta, MmsbParams};
use mixmemb::spectral::{estimate_k_usvt, USVT_ETA};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

/// Mixed-membership blockmodel inference, simulation and evaluation.
#[derive(Parser, Debug)]
#[command(name = "mixmemb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a graph and its memberships from the model.
    Generate(GenerateArgs),
    /// Estimate memberships, community strengths and sparsity from an edge list.
    Fit(FitArgs),
    /// Run a simulation sweep described by a JSON config file.
    Sweep(SweepArgs),
    /// Compare an estimated membership matrix against ground truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Diagonal community strengths, comma separated; defaults to K ones.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    /// Off-diagonal community strength.
    #[arg(long, default_value_t = 0.0)]
    offdiag: f64,
    /// One-hot nodes planted per community.
    #[arg(long, default_value_t = 0)]
    pure_per_community: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample the diagonal of the adjacency matrix too.
    #[arg(long)]
    self_loops: bool,
    /// Output directory for graph.txt, theta.csv and params.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Pick {
    Random,
    LargestNorm,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Whitespace-separated edge list.
    graph: PathBuf,
    /// Number of communities.
    #[arg(long, conflicts_with = "estimate_k", required_unless_present = "estimate_k")]
    k: Option<usize>,
    /// Estimate the number of communities by singular value thresholding.
    #[arg(long)]
    estimate_k: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embed the whole graph instead of using the two-half split.
    #[arg(long)]
    no_split: bool,
    /// Fixed candidate threshold instead of the adaptive sweep.
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long, default_value_t = mixmemb::geonmf::KAPPA_MAX)]
    kappa_max: f64,
    #[arg(long, value_enum, default_value_t = Pick::Random)]
    pick: Pick,
    /// Recursively remove isolated nodes before fitting.
    #[arg(long)]
    prune: bool,
    /// Node ids in the edge list start at 1.
    #[arg(long)]
    one_indexed: bool,
    /// Ground-truth memberships (CSV) to score the fit against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory for theta_hat.csv and fit.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    config: PathBuf,
    /// Results file; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides MIXMEMB_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    theta_hat: PathBuf,
    theta: PathBuf,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let beta = args.beta.clone().unwrap_or_else(|| vec![1.0; args.k]);
    if beta.len() != args.k {
        bail!("--beta has {} entries but --k is {}", beta.len(), args.k);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let cb = build_b(&beta, args.offdiag)?;
    let theta = sample_theta(args.n, args.k, args.alpha0, &mut rng)?;
    let theta = plant_pure_nodes(theta, args.pure_per_community)?;
    let params = MmsbParams::new(theta, cb.b, args.rho * cb.scale, args.alpha0)?;
    let a = sample_adjacency_from_params(&params, &mut rng, args.self_loops);

    ensure_dir(&args.out)?;
    write_edge_list(&a, &args.out.join("graph.txt"))?;
    write_matrix_csv(&params.theta, &args.out.join("theta.csv"))?;
    fs::write(args.out.join("params.json"), serde_json::to_string_pretty(&params)?)?;
    println!(
        "{}",
        json!({
            "n": args.n,
            "k": args.k,
            "edges": a.edge_count(),
            "self_loops": a.self_loop_count(),
            "rho": params.rho,
            "beta": params.beta(),
        })
    );
    Ok(())
}

fn fit_cmd(args: &FitArgs) -> Result<()> {
    let graph = load_edge_list(&args.graph, !args.one_indexed)?;
    let (graph, nodes) = if args.prune {
        let (g, keep) = graph.prune_isolated();
        info!("pruning kept {} of {} nodes", g.n(), graph.n());
        (g, keep)
    } else {
        let n = graph.n();
        (graph, (0..n).collect())
    };
    let k = match args.k {
        Some(k) => k,
        None => {
            let k = estimate_k_usvt(&graph, USVT_ETA)?;
            info!("estimated K = {k}");
            if k == 0 {
                bail!("no eigenvalue above the noise threshold; the graph looks empty");
            }
            k
        }
    };
    let opts = FitOptions {
        split: !args.no_split,
        eps0: args.eps0,
        kappa_max: args.kappa_max,
        pick: match args.pick {
            Pick::Random => PickRule::Random,
            Pick::LargestNorm => PickRule::LargestNorm,
        },
        ..FitOptions::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let result = fit(graph.as_sparse(), k, &opts, &mut rng)?;
    if !result.degenerate_rows.is_empty() {
        warn!(
            "{} node(s) have no usable membership estimate and were set to uniform",
            result.degenerate_rows.len()
        );
    }

    let metrics = match &args.truth {
        Some(path) => {
            let truth = load_ground_truth(path)?;
            if truth.nrows() < nodes.iter().max().map_or(0, |m| m + 1) || truth.ncols() != k {
                bail!(
                    "ground truth is {}x{}, expected at least {} rows and {k} columns",
                    truth.nrows(),
                    truth.ncols(),
                    nodes.len()
                );
            }
            let truth = truth.select_rows(&nodes);
            let degrees = graph.degrees();
            let active: Vec<usize> = (0..graph.n()).filter(|&i| degrees[i] > 0.0).collect();
            Some(score(&result.theta_hat.select_rows(&active), &truth.select_rows(&active))?)
        }
        None => None,
    };

    ensure_dir(&args.out)?;
    write_matrix_csv(&result.theta_hat, &args.out.join("theta_hat.csv"))?;
    let report = json!({
        "n": graph.n(),
        "k": k,
        "rho_hat": result.rho_hat,
        "b_hat": result.b_hat,
        "eps0": result.eps0(),
        "kappa": result.condition_number(),
        "split": opts.split,
        "alignment": result.alignment,
        "degenerate_rows": result.degenerate_rows.iter().map(|&i| nodes[i]).collect::<Vec<_>>(),
        "nodes": if args.prune { Some(&nodes) } else { None },
        "metrics": metrics,
    });
    fs::write(args.out.join("fit.json"), serde_json::to_string_pretty(&report)?)?;
    println!(
        "{}",
        json!({ "k": k, "rho_hat": result.rho_hat, "b_hat": result.b_hat, "metrics": metrics })
    );
    Ok(())
}

fn score(theta_hat: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<serde_json::Value> {
    let perm = align_columns(theta_hat, theta)?.permutation;
    Ok(json!({
        "relative_error": relative_error_at(theta_hat, theta, &perm),
        "rc_avg": rc_avg(theta_hat, theta)?,
        "permutation": perm,
    }))
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    let output = cfg.output.clone().unwrap_or_else(|| PathBuf::from("results.csv"));
    cfg.output = Some(output.clone());
    let rows = match args.threads {
        Some(t) => mixmemb::harness::run_experiment_with_threads(&cfg, Some(t))?,
        None => run_experiment(&cfg)?,
    };
    let summary = summarize(&rows);
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let summary_path = output.with_file_name(format!("{stem}_summary.csv"));
    write_summary(&summary, &summary_path)?;
    // Rewrite so the results file exists even if the library skipped it.
    write_results(&rows, &output)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "{}",
        json!({
            "rows": rows.len(),
            "failed": failed,
            "results": output,
            "summary": summary_path,
        })
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let theta_hat = read_matrix_csv(&args.theta_hat)?;
    let theta = load_ground_truth(&args.theta)?;
    if theta_hat.shape() != theta.shape() {
        bail!(
            "shape mismatch: estimate is {}x{}, truth is {}x{}",
            theta_hat.nrows(),
            theta_hat.ncols(),
            theta.nrows(),
            theta.ncols()
        );
    }
    println!("{}", score(&theta_hat, &theta)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
