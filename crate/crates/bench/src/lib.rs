//! Shared fixtures for the criterion benches.

use mixmemb::model::{build_b, sample_adjacency_from_params, sample_theta};
use mixmemb::{AdjacencyMatrix, MmsbParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Balanced `K`-community instance with identity `B`, `alpha0 = 1` and
/// expected degree near `avg_degree`.
pub fn instance(n: usize, k: usize, avg_degree: f64, seed: u64) -> (MmsbParams, AdjacencyMatrix) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let b = build_b(&vec![1.0; k], 0.0).expect("valid B").b;
    let theta = sample_theta(n, k, 1.0, &mut rng).expect("valid theta");
    let rho = (avg_degree * k as f64 / n as f64).min(1.0);
    let params = MmsbParams::new(theta, b, rho, 1.0).expect("valid params");
    let a = sample_adjacency_from_params(&params, &mut rng, true);
    (params, a)
}

/// Uniform `[0, 1)` square cost matrix.
pub fn cost_matrix(k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    DMatrix::from_fn(k, k, |_, _| rng.random())
}
