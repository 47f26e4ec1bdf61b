//! Mixed-membership stochastic blockmodel generator.
//!
//! Memberships are rows of a symmetric Dirichlet draw, the probability
//! matrix is `P = rho * Theta * B * Theta^T`, and the observed graph flips an
//! independent coin per unordered node pair.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseSymmetric};

/// Largest `n` for which a dense probability matrix is materialized.
pub const MAX_DENSE_N: usize = 20_000;

const ROW_SUM_TOL: f64 = 1e-12;

/// Ground-truth model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsbParams {
    pub theta: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub rho: f64,
    pub alpha0: f64,
}

impl MmsbParams {
    pub fn new(theta: DMatrix<f64>, b: DMatrix<f64>, rho: f64, alpha0: f64) -> Result<Self> {
        let k = theta.ncols();
        if k == 0 || theta.nrows() == 0 {
            return Err(Error::invalid("theta must have at least one row and column"));
        }
        if b.shape() != (k, k) {
            return Err(Error::invalid(format!(
                "B must be {k}x{k}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        for (i, row) in theta.row_iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::invalid(format!("theta row {i} has a negative or NaN entry")));
            }
            if (row.sum() - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("theta row {i} does not sum to 1")));
            }
        }
        if b != b.transpose() {
            return Err(Error::invalid("B must be symmetric"));
        }
        if b.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("B must be nonnegative"));
        }
        if (b.max() - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::invalid("max entry of B must be 1"));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
        }
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::invalid(format!("alpha0 must be positive, got {alpha0}")));
        }
        Ok(MmsbParams {
            theta,
            b,
            rho,
            alpha0,
        })
    }

    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    pub fn k(&self) -> usize {
        self.theta.ncols()
    }

    /// Diagonal of `B`.
    pub fn beta(&self) -> Vec<f64> {
        self.b.diagonal().iter().copied().collect()
    }

    /// The nonnegative factor `sqrt(rho) * Theta * B^(1/2)`; `B` must be diagonal.
    pub fn snmf_factor(&self) -> Result<DMatrix<f64>> {
        let k = self.k();
        for a in 0..k {
            for c in 0..k {
                if a != c && self.b[(a, c)] != 0.0 {
                    return Err(Error::invalid("SNMF factor requires a diagonal B"));
                }
            }
        }
        let mut w = self.theta.clone();
        for a in 0..k {
            let s = (self.rho * self.b[(a, a)]).sqrt();
            w.column_mut(a).scale_mut(s);
        }
        Ok(w)
    }
}

/// Dense edge-probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    pub p: DMatrix<f64>,
}

impl ProbabilityMatrix {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn to_sparse(&self) -> SparseSymmetric {
        SparseSymmetric::from_dense(&self.p).expect("probability matrix is symmetric by construction")
    }
}

/// Symmetric 0/1 adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    m: SparseSymmetric,
}

impl AdjacencyMatrix {
    /// Builds an undirected graph on `n` nodes. Duplicate pairs (in either
    /// orientation) are collapsed; `(i, i)` entries become self-loops.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            rows[i].push(j);
            if i != j {
                rows[j].push(i);
            }
        }
        let mut triplets = Vec::new();
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            triplets.extend(row.iter().map(|&j| (i, j, 1.0)));
        }
        let csr = CsrMatrix::from_triplets(n, n, triplets)?;
        Ok(AdjacencyMatrix {
            m: SparseSymmetric::new(csr)?,
        })
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn as_sparse(&self) -> &SparseSymmetric {
        &self.m
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.m.get(i, j) != 0.0
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.m.row(i).0
    }

    /// Number of unordered edges, self-loops counted once.
    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn self_loop_count(&self) -> usize {
        (0..self.n()).filter(|&i| self.has_edge(i, i)).count()
    }

    /// Unordered edges `(i, j)` with `i <= j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.m.iter().filter(|&(i, j, _)| i <= j).map(|(i, j, _)| (i, j))
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.m.row_sums()
    }

    /// Induced subgraph on `keep`, renumbered in that order.
    pub fn induced(&self, keep: &[usize]) -> AdjacencyMatrix {
        AdjacencyMatrix {
            m: self.m.principal(keep),
        }
    }

    /// Repeatedly drops zero-degree nodes; returns the pruned graph and the
    /// original ids of the kept nodes.
    pub fn prune_isolated(&self) -> (AdjacencyMatrix, Vec<usize>) {
        let mut keep: Vec<usize> = (0..self.n()).collect();
        let mut g = self.clone();
        loop {
            let deg = g.degrees();
            let local: Vec<usize> = (0..g.n()).filter(|&i| deg[i] > 0.0).collect();
            if local.len() == g.n() {
                return (g, keep);
            }
            keep = local.iter().map(|&i| keep[i]).collect();
            g = g.induced(&local);
        }
    }
}

/// Draws `n` membership rows from a symmetric Dirichlet with total
/// concentration `alpha0`.
pub fn sample_theta<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    alpha0: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("sample_theta needs n >= 1 and k >= 1"));
    }
    if !(alpha0.is_finite() && alpha0 > 0.0) {
        return Err(Error::invalid(format!("alpha0 must be finite and positive, got {alpha0}")));
    }
    let shape = alpha0 / k as f64;
    // Small shapes underflow Gamma(shape) to exactly zero, so draw in log
    // space: Gamma(a) = Gamma(a + 1) * U^(1/a).
    let boosted = shape < 1.0;
    let gamma = Gamma::new(if boosted { shape + 1.0 } else { shape }, 1.0)
        .map_err(|e| Error::invalid(format!("gamma shape: {e}")))?;
    let mut theta = DMatrix::zeros(n, k);
    let mut logs = vec![0.0; k];
    for i in 0..n {
        for l in logs.iter_mut() {
            let g: f64 = gamma.sample(rng);
            *l = g.ln();
            if boosted {
                let u: f64 = rng.random();
                // random() is in [0, 1); 1 - u is in (0, 1].
                *l += (1.0 - u).ln() / shape;
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (a, &l) in logs.iter().enumerate() {
            let e = (l - max).exp();
            theta[(i, a)] = e;
            total += e;
        }
        theta.row_mut(i).unscale_mut(total);
    }
    Ok(theta)
}

/// Overwrites the first `per_community * K` rows with one-hot rows; row `r`
/// gets community `r mod K`.
pub fn plant_pure_nodes(mut theta: DMatrix<f64>, per_community: usize) -> Result<DMatrix<f64>> {
    let (n, k) = theta.shape();
    let count = per_community
        .checked_mul(k)
        .ok_or_else(|| Error::invalid("pure node count overflows"))?;
    if count > n {
        return Err(Error::invalid(format!(
            "cannot plant {per_community} pure nodes per community: {count} > n = {n}"
        )));
    }
    for r in 0..count {
        theta.row_mut(r).fill(0.0);
        theta[(r, r % k)] = 1.0;
    }
    Ok(theta)
}

/// Community matrix `diag(beta - eps) + eps * 1 1^T`, rescaled to max entry 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityMatrix {
    pub b: DMatrix<f64>,
    /// Max entry before rescaling; the unscaled matrix is `scale * b`.
    pub scale: f64,
}

pub fn build_b(beta: &[f64], offdiag_eps: f64) -> Result<CommunityMatrix> {
    if beta.is_empty() {
        return Err(Error::invalid("beta must be non-empty"));
    }
    if let Some(bad) = beta.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::invalid(format!("beta entries must lie in (0, 1], got {bad}")));
    }
    let min = beta.iter().copied().fold(f64::INFINITY, f64::min);
    if !(offdiag_eps >= 0.0 && offdiag_eps <= min) {
        return Err(Error::invalid(format!(
            "off-diagonal eps must lie in [0, min(beta) = {min}], got {offdiag_eps}"
        )));
    }
    let k = beta.len();
    let mut b = DMatrix::from_element(k, k, offdiag_eps);
    for (a, &x) in beta.iter().enumerate() {
        b[(a, a)] = x;
    }
    let scale = b.max();
    if scale != 1.0 {
        b.unscale_mut(scale);
    }
    Ok(CommunityMatrix { b, scale })
}

#[inline]
fn pair_prob(w: &DMatrix<f64>, theta: &DMatrix<f64>, rho: f64, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..theta.ncols() {
        s += w[(i, a)] * theta[(j, a)];
    }
    (rho * s).clamp(0.0, rho)
}

pub fn build_probability_matrix(params: &MmsbParams) -> Result<ProbabilityMatrix> {
    let n = params.n();
    if n > MAX_DENSE_N {
        return Err(Error::TooLarge {
            n,
            limit: MAX_DENSE_N,
        });
    }
    let w = &params.theta * &params.b;
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = pair_prob(&w, &params.theta, params.rho, i, j);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    Ok(ProbabilityMatrix { p })
}

fn sample_pairs<R: Rng + ?Sized>(
    n: usize,
    include_diagonal: bool,
    rng: &mut R,
    mut prob: impl FnMut(usize, usize) -> f64,
) -> AdjacencyMatrix {
    let mut edges = Vec::new();
    for i in 0..n {
        let start = if include_diagonal { i } else { i + 1 };
        for j in start..n {
            let u: f64 = rng.random();
            if u < prob(i, j) {
                edges.push((i, j));
            }
        }
    }
    AdjacencyMatrix::from_edges(n, edges).expect("sampled edges are in range")
}

/// Samples `A_ij = A_ji ~ Bernoulli(P_ij)` for `i < j`, and `A_ii` when
/// `include_diagonal` is set.
pub fn sample_adjacency<R: Rng + ?Sized>(
    p: &ProbabilityMatrix,
    rng: &mut R,
    include_diagonal: bool,
) -> AdjacencyMatrix {
    sample_pairs(p.n(), include_diagonal, rng, |i, j| p.p[(i, j)])
}

/// Same draw as [`sample_adjacency`] on [`build_probability_matrix`], without
/// materializing `P`. Consumes the generator identically, so both routes
/// return the same graph for the same seed.
pub fn sample_adjacency_from_params<R: Rng + ?Sized>(
    params: &MmsbParams,
    rng: &mut R,
    include_diagonal: bool,
) -> AdjacencyMatrix {
    let w = &params.theta * &params.b;
    sample_pairs(params.n(), include_diagonal, rng, |i, j| {
        pair_prob(&w, &params.theta, params.rho, i, j)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn m1() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5])
    }

    fn m2() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.5])
    }

    #[test]
    fn theta_rows_are_stochastic() {
        let theta = sample_theta(3, 2, 1.0, &mut rng(1)).unwrap();
        for row in theta.row_iter() {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_alpha_gives_nearly_pure_rows() {
        let theta = sample_theta(100, 3, 1e-6, &mut rng(2)).unwrap();
        for row in theta.row_iter() {
            assert!(row.max() > 0.999, "row {row}");
        }
    }

    #[test]
    fn huge_alpha_concentrates_at_uniform() {
        let theta = sample_theta(1000, 4, 1e6, &mut rng(3)).unwrap();
        for a in 0..4 {
            let mean = theta.column(a).mean();
            assert!((mean - 0.25).abs() < 0.02, "column {a} mean {mean}");
        }
    }

    #[test]
    fn theta_rejects_bad_arguments() {
        assert!(sample_theta(0, 2, 1.0, &mut rng(0)).is_err());
        assert!(sample_theta(2, 0, 1.0, &mut rng(0)).is_err());
        assert!(sample_theta(2, 2, f64::NAN, &mut rng(0)).is_err());
        assert!(sample_theta(2, 2, f64::INFINITY, &mut rng(0)).is_err());
        assert!(sample_theta(2, 2, 0.0, &mut rng(0)).is_err());
    }

    #[test]
    fn planting() {
        let theta = sample_theta(6, 3, 1.0, &mut rng(4)).unwrap();
        assert_eq!(plant_pure_nodes(theta.clone(), 0).unwrap(), theta);

        let planted = plant_pure_nodes(sample_theta(4, 2, 1.0, &mut rng(5)).unwrap(), 1).unwrap();
        assert_eq!(planted.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(planted.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);

        let planted = plant_pure_nodes(theta.clone(), 2).unwrap();
        for r in 0..6 {
            let expected: Vec<f64> = (0..3).map(|a| if a == r % 3 { 1.0 } else { 0.0 }).collect();
            assert_eq!(planted.row(r).iter().copied().collect::<Vec<_>>(), expected);
        }
        assert!(plant_pure_nodes(theta, 3).is_err());
    }

    #[test]
    fn planting_leaves_tail_untouched() {
        let theta = sample_theta(10, 2, 1.0, &mut rng(6)).unwrap();
        let planted = plant_pure_nodes(theta.clone(), 2).unwrap();
        for r in 4..10 {
            assert_eq!(planted.row(r), theta.row(r));
        }
    }

    #[test]
    fn build_b_cases() {
        let cm = build_b(&[0.6, 0.8, 1.0], 0.0).unwrap();
        assert_eq!(cm.b, DMatrix::from_diagonal(&nalgebra::dvector![0.6, 0.8, 1.0]));
        assert_eq!(cm.scale, 1.0);

        assert_eq!(build_b(&[1.0, 1.0], 0.0).unwrap().b, DMatrix::identity(2, 2));

        let cm = build_b(&[0.5, 1.0], 0.1).unwrap();
        assert_eq!(cm.b, DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 1.0]));

        assert!(build_b(&[0.5, 1.0], 0.6).is_err());
        assert!(build_b(&[0.0, 1.0], 0.0).is_err());
        assert!(build_b(&[1.2], 0.0).is_err());
    }

    #[test]
    fn build_b_rescales_to_unit_max() {
        let cm = build_b(&[0.2, 0.5], 0.1).unwrap();
        assert_eq!(cm.scale, 0.5);
        assert!((cm.b.max() - 1.0).abs() < 1e-15);
        assert!((cm.b[(0, 0)] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn identifiability_counterexample() {
        let a = MmsbParams::new(m1(), DMatrix::identity(3, 3), 1.0, 1.0).unwrap();
        let b = MmsbParams::new(DMatrix::identity(3, 3), m2() * 2.0, 0.5, 1.0).unwrap();
        let pa = build_probability_matrix(&a).unwrap();
        let pb = build_probability_matrix(&b).unwrap();
        assert_eq!(pa, pb);
        // Direct 3x3 product: diagonal 0.5, off-diagonal 0.25.
        assert_eq!(pa.p, m2());
    }

    #[test]
    fn one_hot_gives_block_diagonal() {
        let theta = DMatrix::from_row_slice(5, 2, &[1., 0., 1., 0., 0., 1., 1., 0., 0., 1.]);
        let params = MmsbParams::new(theta.clone(), DMatrix::identity(2, 2), 1.0, 1.0).unwrap();
        let p = build_probability_matrix(&params).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let same = theta.row(i) == theta.row(j);
                assert_eq!(p.p[(i, j)], if same { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn params_validation() {
        let theta = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!(MmsbParams::new(theta.clone(), DMatrix::identity(2, 2), 1.0, 1.0).is_ok());
        assert!(MmsbParams::new(theta.clone(), DMatrix::identity(2, 2) * 0.5, 1.0, 1.0).is_err());
        assert!(MmsbParams::new(theta.clone(), DMatrix::identity(2, 2), 0.0, 1.0).is_err());
        assert!(MmsbParams::new(theta.clone(), DMatrix::identity(3, 3), 1.0, 1.0).is_err());
        let bad = DMatrix::from_row_slice(1, 2, &[0.6, 0.5]);
        assert!(MmsbParams::new(bad, DMatrix::identity(2, 2), 1.0, 1.0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(MmsbParams::new(theta, asym, 1.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_probabilities() {
        let zeros = ProbabilityMatrix {
            p: DMatrix::zeros(5, 5),
        };
        assert_eq!(sample_adjacency(&zeros, &mut rng(7), true).edge_count(), 0);

        let ones = ProbabilityMatrix {
            p: DMatrix::from_element(5, 5, 1.0),
        };
        let a = sample_adjacency(&ones, &mut rng(8), false);
        assert_eq!(a.edge_count(), 10);
        assert_eq!(a.self_loop_count(), 0);
        let a = sample_adjacency(&ones, &mut rng(8), true);
        assert_eq!(a.edge_count(), 15);
    }

    #[test]
    fn edge_count_binomial_concentration() {
        let n = 2000usize;
        let p = ProbabilityMatrix {
            p: DMatrix::from_element(n, n, 0.01),
        };
        let a = sample_adjacency(&p, &mut rng(9), false);
        let trials = (n * (n - 1) / 2) as f64;
        let mean = trials * 0.01;
        let sd = (trials * 0.01 * 0.99).sqrt();
        let got = a.edge_count() as f64;
        assert!((got - mean).abs() < 4.0 * sd, "edges {got}, mean {mean}, sd {sd}");
    }

    #[test]
    fn streaming_sampler_matches_dense_route() {
        let mut r = rng(10);
        let theta = sample_theta(60, 3, 1.0, &mut r).unwrap();
        let b = build_b(&[0.6, 0.8, 1.0], 0.05).unwrap().b;
        let params = MmsbParams::new(theta, b, 0.3, 1.0).unwrap();
        let p = build_probability_matrix(&params).unwrap();
        for diag in [false, true] {
            let a1 = sample_adjacency(&p, &mut rng(11), diag);
            let a2 = sample_adjacency_from_params(&params, &mut rng(11), diag);
            assert_eq!(a1, a2);
        }
    }

    #[test]
    fn snmf_factor_reconstructs_p() {
        let mut r = rng(12);
        let theta = plant_pure_nodes(sample_theta(30, 3, 1.0, &mut r).unwrap(), 1).unwrap();
        let b = build_b(&[0.6, 0.8, 1.0], 0.0).unwrap().b;
        let params = MmsbParams::new(theta, b, 0.7, 1.0).unwrap();
        let w = params.snmf_factor().unwrap();
        let p = build_probability_matrix(&params).unwrap();
        assert!((&p.p - &w * w.transpose()).norm() < 1e-10);

        let offdiag = MmsbParams {
            b: build_b(&[0.6, 0.8, 1.0], 0.1).unwrap().b,
            ..params
        };
        assert!(offdiag.snmf_factor().is_err());
    }

    #[test]
    fn too_large_dense_rejected() {
        let theta = DMatrix::from_element(MAX_DENSE_N + 1, 1, 1.0);
        let params = MmsbParams::new(theta, DMatrix::identity(1, 1), 1.0, 1.0).unwrap();
        assert!(matches!(
            build_probability_matrix(&params),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn prune_drops_isolated_nodes() {
        let a = AdjacencyMatrix::from_edges(5, [(0, 1), (3, 4)]).unwrap();
        let (g, keep) = a.prune_isolated();
        assert_eq!(keep, vec![0, 1, 3, 4]);
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_edge(2, 3));
    }

    #[test]
    fn from_edges_collapses_duplicates() {
        let a = AdjacencyMatrix::from_edges(3, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(a.edge_count(), 1);
        assert!(a.has_edge(1, 0));
    }
}
