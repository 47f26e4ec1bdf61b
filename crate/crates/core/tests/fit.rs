use mixmemb::eval::{align_columns, relative_error};
use mixmemb::geonmf::{fit, FitOptions};
use mixmemb::model::{build_b, build_probability_matrix, plant_pure_nodes, sample_adjacency_from_params, sample_theta, MmsbParams};
use mixmemb::{Error, SparseSymmetric};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn planted(n: usize, beta: &[f64], rho: f64, alpha0: f64, pure: usize, seed: u64) -> MmsbParams {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let theta = sample_theta(n, beta.len(), alpha0, &mut rng).unwrap();
    let theta = plant_pure_nodes(theta, pure).unwrap();
    let cb = build_b(beta, 0.0).unwrap();
    MmsbParams::new(theta, cb.b, rho * cb.scale, alpha0).unwrap()
}

fn check_exact(params: &MmsbParams, p: &SparseSymmetric, opts: &FitOptions, seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let r = fit(p, params.k(), opts, &mut rng).unwrap();
    let err = relative_error(&r.theta_hat, &params.theta).unwrap();
    assert!(err < 1e-6, "relative error {err}");
    let perm = align_columns(&r.theta_hat, &params.theta).unwrap().permutation;
    let beta = params.beta();
    for (i, &j) in perm.iter().enumerate() {
        assert!((r.b_hat[i] - beta[j]).abs() < 1e-6, "b_hat {:?} vs {beta:?}", r.b_hat);
    }
    assert!((r.rho_hat - params.rho).abs() / params.rho < 1e-6);
}

#[test]
fn noiseless_whole_graph_is_exact() {
    let params = planted(400, &[0.6, 0.8, 1.0], 0.7, 1.0, 2, 11);
    let p = build_probability_matrix(&params).unwrap().to_sparse();
    let opts = FitOptions { split: false, ..FitOptions::noiseless() };
    check_exact(&params, &p, &opts, 5);
}

#[test]
fn noiseless_split_is_exact_with_enough_pure_nodes() {
    let params = planted(300, &[0.5, 1.0, 0.75, 0.9], 0.4, 0.5, 15, 12);
    let p = build_probability_matrix(&params).unwrap().to_sparse();
    for seed in 0..5 {
        check_exact(&params, &p, &FitOptions::noiseless(), seed);
    }
}

#[test]
fn single_community() {
    let n = 50;
    let p = SparseSymmetric::from_dense(&DMatrix::from_element(n, n, 0.3)).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    for split in [false, true] {
        let opts = FitOptions { split, ..FitOptions::noiseless() };
        let r = fit(&p, 1, &opts, &mut rng).unwrap();
        assert!(r.theta_hat.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(r.b_hat, vec![1.0]);
        assert!((r.rho_hat - 0.3).abs() < 1e-10);
    }
}

#[test]
fn scaling_the_input_scales_only_rho() {
    let params = planted(200, &[0.7, 1.0], 0.5, 1.0, 3, 3);
    let p = build_probability_matrix(&params).unwrap();
    let half = SparseSymmetric::from_dense(&(&p.p * 0.5)).unwrap();
    let opts = FitOptions { split: false, ..FitOptions::noiseless() };
    let r1 = fit(&p.to_sparse(), 2, &opts, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let r2 = fit(&half, 2, &opts, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    assert!((&r1.theta_hat - &r2.theta_hat).norm() < 1e-8);
    assert!((r2.rho_hat - 0.5 * r1.rho_hat).abs() < 1e-10);
    for (a, b) in r1.b_hat.iter().zip(&r2.b_hat) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn node_relabeling_permutes_rows() {
    let params = planted(150, &[0.6, 1.0, 0.8], 0.9, 0.6, 2, 8);
    let p = build_probability_matrix(&params).unwrap().p;
    let n = p.nrows();
    let order: Vec<usize> = (0..n).rev().collect();
    let q = DMatrix::from_fn(n, n, |i, j| p[(order[i], order[j])]);
    let opts = FitOptions { split: false, ..FitOptions::noiseless() };
    let r1 = fit(&SparseSymmetric::from_dense(&p).unwrap(), 3, &opts, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    let r2 = fit(&SparseSymmetric::from_dense(&q).unwrap(), 3, &opts, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    let back = DMatrix::from_fn(n, 3, |i, a| r2.theta_hat[(n - 1 - i, a)]);
    assert!(relative_error(&back, &r1.theta_hat).unwrap() < 1e-8);
}

#[test]
fn sampled_fit_is_deterministic_and_row_stochastic() {
    let params = planted(600, &[0.6, 0.8, 1.0], 1.0, 1.0, 0, 21);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let a = sample_adjacency_from_params(&params, &mut rng, true);
    let run = || fit(a.as_sparse(), 3, &FitOptions::default(), &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
    let (r1, r2) = (run(), run());
    assert_eq!(r1, r2);
    for row in r1.theta_hat.row_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&v| v >= 0.0));
    }
    assert_eq!(r1.b_hat.iter().copied().fold(0.0, f64::max), 1.0);
    assert!(relative_error(&r1.theta_hat, &params.theta).unwrap() < 0.3);
    assert_eq!(r1.halves.len(), 2);
}

#[test]
fn too_few_active_nodes() {
    let p = SparseSymmetric::from_dense(&DMatrix::from_element(3, 3, 1.0)).unwrap();
    let err = fit(&p, 2, &FitOptions::default(), &mut ChaCha20Rng::seed_from_u64(0)).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}
