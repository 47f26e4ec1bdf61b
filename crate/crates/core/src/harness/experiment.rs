use std::sync::Mutex;
use std::time::Instant;

use log::{debug, info};
use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::io::write_results;
use crate::error::{Error, Result};
use crate::eval::{align_columns, relative_error_at};
use crate::geonmf::{fit, FitOptions, FitResult};
use crate::model::{build_b, plant_pure_nodes, sample_adjacency_from_params, sample_theta, AdjacencyMatrix, MmsbParams};

/// One measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub value: f64,
    pub replicate: usize,
    pub seed: u64,
    pub rel_err_theta: f64,
    pub rel_err_b: f64,
    pub rho_err: f64,
    pub runtime_ms: f64,
    pub eps0: f64,
    pub kappa: f64,
    pub status: String,
}

/// Mean and sample standard deviation per grid value, over `ok` rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub value: f64,
    pub ok: usize,
    pub failed: usize,
    pub rel_err_theta: (f64, f64),
    pub rel_err_b: (f64, f64),
    pub rho_err: (f64, f64),
    pub runtime_ms: (f64, f64),
}

/// A generated model and one sampled graph.
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: MmsbParams,
    pub adjacency: AdjacencyMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub rel_err_theta: f64,
    pub rel_err_b: f64,
    pub rho_err: f64,
    /// Estimated column `i` matches true column `permutation[i]`.
    pub permutation: Vec<usize>,
}

/// Seed for grid point `point`, replicate `replicate`: the first output of
/// ChaCha20 keyed by the master seed on stream `(point << 32) | replicate`.
pub fn child_seed(master: u64, point: usize, replicate: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(((point as u64) << 32) | replicate as u64);
    rng.next_u64()
}

/// Builds the model for grid value `value` and samples a graph from it.
pub fn generate_instance<R: Rng + ?Sized>(cfg: &ExperimentConfig, value: f64, rng: &mut R) -> Result<Instance> {
    let mut n = cfg.n;
    let mut k = cfg.k;
    let mut alpha0 = cfg.alpha0;
    let mut rho = cfg.rho();
    let mut eps = 0.0;
    let mut beta = cfg.base_beta();
    match cfg.experiment {
        ExperimentKind::SkewB => beta = vec![0.5 - value, 0.5, 0.5 + value],
        ExperimentKind::Offdiag => eps = value,
        ExperimentKind::Alpha0 => alpha0 = value,
        ExperimentKind::Rho => rho = value,
        ExperimentKind::K => {
            k = value as usize;
            beta = (0..k).map(|_| 0.35 + 0.65 * rng.random::<f64>()).collect();
        }
        ExperimentKind::Timing => {
            n = value as usize;
            beta = (0..k).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
        }
        ExperimentKind::Single => {}
    }
    let cb = build_b(&beta, eps)?;
    rho *= cb.scale;
    if let Some(d) = cfg.average_degree() {
        rho = (d * (k * k) as f64 / (n as f64 * cb.b.sum())).min(1.0);
    }
    let theta = sample_theta(n, k, alpha0, rng)?;
    let theta = plant_pure_nodes(theta, cfg.pure_per_community)?;
    let params = MmsbParams::new(theta, cb.b, rho, alpha0)?;
    let adjacency = sample_adjacency_from_params(&params, rng, cfg.self_loops);
    Ok(Instance { params, adjacency })
}

/// Errors of a fit against the generating parameters, over the rows in
/// `rows` (typically the non-isolated nodes).
pub fn evaluate_fit(result: &FitResult, params: &MmsbParams, rows: &[usize]) -> Result<Metrics> {
    let k = params.k();
    if result.k() != k {
        return Err(Error::invalid(format!("fit has {} communities, truth has {k}", result.k())));
    }
    let theta_hat = result.theta_hat.select_rows(rows);
    let theta = params.theta.select_rows(rows);
    let permutation = align_columns(&theta_hat, &theta)?.permutation;
    let rel_err_theta = relative_error_at(&theta_hat, &theta, &permutation);
    let mut b_hat = DMatrix::zeros(k, k);
    for (i, &j) in permutation.iter().enumerate() {
        b_hat[(j, j)] = result.b_hat[i];
    }
    let rel_err_b = (&b_hat - &params.b).norm() / params.b.norm();
    Ok(Metrics {
        rel_err_theta,
        rel_err_b,
        rho_err: (result.rho_hat - params.rho).abs(),
        permutation,
    })
}

fn run_one(cfg: &ExperimentConfig, point: usize, value: f64, replicate: usize) -> Result<ResultRow> {
    let seed = child_seed(cfg.seed, point, replicate);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let inst = generate_instance(cfg, value, &mut rng)?;
    let opts = FitOptions {
        split: cfg.split,
        ..FitOptions::default()
    };
    let start = Instant::now();
    let fitted = fit(inst.adjacency.as_sparse(), inst.params.k(), &opts, &mut rng);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let runtime_ms = if cfg.record_runtime() { elapsed } else { 0.0 };
    let mut row = ResultRow {
        experiment: cfg.experiment.name().to_string(),
        value,
        replicate,
        seed,
        rel_err_theta: f64::NAN,
        rel_err_b: f64::NAN,
        rho_err: f64::NAN,
        runtime_ms,
        eps0: f64::NAN,
        kappa: f64::NAN,
        status: "ok".into(),
    };
    match fitted {
        Ok(r) => {
            let degrees = inst.adjacency.degrees();
            let active: Vec<usize> = (0..degrees.len()).filter(|&i| degrees[i] > 0.0).collect();
            let m = evaluate_fit(&r, &inst.params, &active)?;
            row.rel_err_theta = m.rel_err_theta;
            row.rel_err_b = m.rel_err_b;
            row.rho_err = m.rho_err;
            row.eps0 = r.eps0();
            row.kappa = r.condition_number();
        }
        Err(e) => {
            debug!("{} value={value} replicate={replicate}: {e}", row.experiment);
            row.status = e.status().to_string();
        }
    }
    Ok(row)
}

fn thread_cap() -> Option<usize> {
    std::env::var("MIXMEMB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

/// Runs every grid point and replicate, honoring `MIXMEMB_THREADS`, and
/// writes `cfg.output` when set. Rows are sorted by grid point, then
/// replicate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with_threads(cfg, thread_cap())
}

pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let grid = cfg.grid();
    let tasks: Vec<(usize, f64, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(p, &v)| (0..cfg.replicates).map(move |r| (p, v, r)))
        .collect();
    info!(
        "{}: {} grid points x {} replicates",
        cfg.experiment.name(),
        grid.len(),
        cfg.replicates
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let collected: Mutex<Vec<(usize, usize, ResultRow)>> = Mutex::new(Vec::with_capacity(tasks.len()));
    pool.install(|| {
        tasks.par_iter().try_for_each(|&(p, v, r)| {
            let row = run_one(cfg, p, v, r)?;
            collected.lock().expect("result collector poisoned").push((p, r, row));
            Ok::<(), Error>(())
        })
    })?;
    let mut rows = collected.into_inner().expect("result collector poisoned");
    rows.sort_by_key(|&(p, r, _)| (p, r));
    let rows: Vec<ResultRow> = rows.into_iter().map(|(_, _, row)| row).collect();
    if let Some(path) = &cfg.output {
        write_results(&rows, path)?;
    }
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (experiment, value) in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(e, v)| *e == r.experiment && v.to_bits() == r.value.to_bits()) {
            keys.push((r.experiment.clone(), r.value));
        }
    }
    keys.into_iter()
        .map(|(experiment, value)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.experiment == experiment && r.value.to_bits() == value.to_bits())
                .collect();
            let ok: Vec<&&ResultRow> = group.iter().filter(|r| r.status == "ok").collect();
            let col = |f: fn(&ResultRow) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                experiment,
                value,
                ok: ok.len(),
                failed: group.len() - ok.len(),
                rel_err_theta: col(|r| r.rel_err_theta),
                rel_err_b: col(|r| r.rel_err_b),
                rho_err: col(|r| r.rho_err),
                runtime_ms: col(|r| r.runtime_ms),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..5 {
            for r in 0..10 {
                assert!(seen.insert(child_seed(7, p, r)));
            }
        }
        assert_eq!(child_seed(7, 2, 3), child_seed(7, 2, 3));
        assert_ne!(child_seed(7, 2, 3), child_seed(8, 2, 3));
    }

    #[test]
    fn instances_follow_panels() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let cfg = ExperimentConfig {
            n: 60,
            ..ExperimentConfig::new(ExperimentKind::SkewB)
        };
        let inst = generate_instance(&cfg, 0.2, &mut rng).unwrap();
        assert_eq!(inst.params.beta(), vec![0.3 / 0.7, 0.5 / 0.7, 1.0]);
        assert!((inst.params.rho - 0.7).abs() < 1e-15);

        let cfg = ExperimentConfig {
            n: 60,
            ..ExperimentConfig::new(ExperimentKind::Offdiag)
        };
        let inst = generate_instance(&cfg, 0.1, &mut rng).unwrap();
        assert_eq!(inst.params.b[(0, 1)], 0.1);

        let cfg = ExperimentConfig {
            n: 60,
            ..ExperimentConfig::new(ExperimentKind::K)
        };
        let inst = generate_instance(&cfg, 5.0, &mut rng).unwrap();
        assert_eq!(inst.params.k(), 5);
        assert!(inst.params.beta().iter().all(|&b| b > 0.35 / 1.0 - 1e-12 && b <= 1.0));

        let cfg = ExperimentConfig::new(ExperimentKind::Timing);
        let inst = generate_instance(&cfg, 2000.0, &mut rng).unwrap();
        assert_eq!(inst.params.n(), 2000);
        let avg = 2.0 * inst.adjacency.edge_count() as f64 / 2000.0;
        assert!((avg - 100.0).abs() < 15.0, "average degree {avg}");
    }

    #[test]
    fn summary_statistics() {
        let row = |v: f64, e: f64, status: &str| ResultRow {
            experiment: "rho".into(),
            value: v,
            replicate: 0,
            seed: 0,
            rel_err_theta: e,
            rel_err_b: e,
            rho_err: e,
            runtime_ms: 0.0,
            eps0: 0.01,
            kappa: 1.0,
            status: status.into(),
        };
        let rows = vec![
            row(0.5, 1.0, "ok"),
            row(0.5, 3.0, "ok"),
            row(0.5, f64::NAN, "merge-failure"),
            row(1.0, 2.0, "ok"),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].ok, s[0].failed), (2, 1));
        assert_eq!(s[0].rel_err_theta, (2.0, 2f64.sqrt()));
        assert_eq!(s[1].rel_err_theta, (2.0, 0.0));
    }
}
