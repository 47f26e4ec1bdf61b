//! Geometric symmetric-NMF inference for the mixed-membership blockmodel.
//!
//! Pipeline for a split fit:
//!
//! 1. split the nodes into halves `S` and `S-bar`;
//! 2. top-K eigendecomposition of each half's diagonal block;
//! 3. embed each half's rows through the other half's eigenvectors,
//!    normalized by degree ([`compute_embedding`]);
//! 4. take the near-maximal-norm rows as pure-node candidates and keep one
//!    representative per community ([`adapt_eps0`]);
//! 5. read `rho * beta` off the representatives and solve for memberships
//!    ([`recover_parameters`]);
//! 6. align the halves' labels ([`merge_bipartitions`]) and assemble.
//!
//! With `split = false` the whole graph is embedded as `D^(-1/2) V E^(1/2)` and
//! steps 4-5 run once.

mod embedding;
mod merge;
mod pure;
mod recover;
mod split;

pub use embedding::{check_positive_spectrum, compute_embedding, compute_embedding_full, SpectralEmbedding, EIGEN_FLOOR};
pub use merge::{merge_bipartitions, AlignStrategy, Alignment};
pub use pure::{
    adapt_eps0, candidate_pure_set, condition_number, partition_pure_nodes, pure_node_tau, purity_condition_number, EPS0_REFINE,
    Partition, PickRule, PureNodeSelection, PureSearch, EPS0_GRID,
};
pub use recover::{recover_parameters, HalfEstimate, KAPPA_MAX};
pub use split::{split_nodes, Bipartition};

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result, StageExt};
use crate::sparse::{CsrMatrix, SparseSymmetric};
use crate::spectral::{row_degrees, top_k_eigs_with, DegreeDiagonal, EigOptions};

/// Purity acceptance threshold when fitting a noiseless probability matrix.
pub const KAPPA_ACCEPT_NOISELESS: f64 = 1.5;
/// Purity acceptance threshold when fitting a sampled graph.
pub const KAPPA_ACCEPT_SAMPLED: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Use the two-half sample split.
    pub split: bool,
    /// Input is a probability matrix rather than a sampled graph.
    pub noiseless: bool,
    /// Fixed candidate threshold instead of the grid sweep.
    pub eps0: Option<f64>,
    pub kappa_max: f64,
    /// Overrides the noiseless/sampled default.
    pub kappa_accept: Option<f64>,
    pub pick: PickRule,
    pub eig: EigOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            split: true,
            noiseless: false,
            eps0: None,
            kappa_max: KAPPA_MAX,
            kappa_accept: None,
            pick: PickRule::Random,
            eig: EigOptions::default(),
        }
    }
}

impl FitOptions {
    /// Settings for fitting a population probability matrix: largest-norm
    /// picks so representatives are exact corners.
    pub fn noiseless() -> Self {
        FitOptions {
            noiseless: true,
            pick: PickRule::LargestNorm,
            ..Self::default()
        }
    }

    pub fn kappa_accept(&self) -> f64 {
        self.kappa_accept.unwrap_or(if self.noiseless {
            KAPPA_ACCEPT_NOISELESS
        } else {
            KAPPA_ACCEPT_SAMPLED
        })
    }

    fn search(&self) -> PureSearch {
        PureSearch {
            eps0: self.eps0,
            kappa_accept: self.kappa_accept(),
            pick: self.pick,
        }
    }
}

/// Diagnostics for one embedding (one half, or the whole graph).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfDiagnostics {
    /// Selection with node ids in the input graph's numbering.
    pub selection: PureNodeSelection,
    /// `rho * beta` in this half's own labeling.
    pub beta_raw: Vec<f64>,
    /// Eigenvalues used for the embedding.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Row-stochastic memberships.
    pub theta_hat: DMatrix<f64>,
    /// Memberships before clipping and renormalization.
    pub raw_theta: DMatrix<f64>,
    /// Diagonal of the estimated community matrix, max entry 1.
    pub b_hat: Vec<f64>,
    pub rho_hat: f64,
    /// `[S half, S-bar half]` in split mode, a single entry otherwise.
    pub halves: Vec<HalfDiagnostics>,
    pub split: Option<Bipartition>,
    pub alignment: Option<Alignment>,
    /// Rows replaced by the uniform membership (zero degree or all-zero estimate).
    pub degenerate_rows: Vec<usize>,
}

impl FitResult {
    pub fn k(&self) -> usize {
        self.b_hat.len()
    }

    /// Largest `eps0` used across halves.
    pub fn eps0(&self) -> f64 {
        self.halves.iter().map(|h| h.selection.eps0).fold(0.0, f64::max)
    }

    /// Worst purity condition number across halves.
    pub fn condition_number(&self) -> f64 {
        self.halves
            .iter()
            .map(|h| h.selection.condition_number)
            .fold(0.0, f64::max)
    }
}

/// Clips negatives to zero and renormalizes rows; rows with no positive
/// mass become uniform and are reported.
pub fn normalize_theta(raw: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let k = raw.ncols();
    let mut out = raw.map(|v| if v > 0.0 { v } else { 0.0 });
    let mut flagged = Vec::new();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let s = row.sum();
        if s > 0.0 && s.is_finite() {
            row.unscale_mut(s);
        } else {
            row.fill(1.0 / k as f64);
            flagged.push(i);
        }
    }
    (out, flagged)
}

struct Half {
    estimate: HalfEstimate,
    selection: PureNodeSelection,
    eigenvalues: Vec<f64>,
}

/// Steps 3-5 for rows `rows` embedded through eigenvectors of the block on
/// `cols`.
#[allow(clippy::too_many_arguments)]
fn fit_half<R: Rng + ?Sized>(
    a: &SparseSymmetric,
    rows: &[usize],
    cols: &[usize],
    k: usize,
    opts: &FitOptions,
    rng: &mut R,
) -> Result<Half> {
    let n = a.n();
    let own: CsrMatrix = a.submatrix(cols, cols);
    let own = SparseSymmetric::new(own)?;
    let eig = top_k_eigs_with(&own, k, &opts.eig).stage("eigendecomposition")?;
    let a21 = a.submatrix(rows, cols);
    let d21 = row_degrees(&a21);
    let d2 = row_degrees(&a.submatrix(rows, rows));
    let x = compute_embedding(&a21, &d21, &eig).stage("embedding")?;
    let selection = adapt_eps0(&x, &d2, k, n, &opts.search(), rng).stage("pure-node selection")?;
    let estimate =
        recover_parameters(&x, &selection.representatives, &d21, opts.kappa_max).stage("parameter recovery")?;
    Ok(Half {
        estimate,
        selection: selection.relabel(rows),
        eigenvalues: eig.values,
    })
}

/// Node ids of the `m` rows with the largest membership in each column.
fn top_members(theta: &DMatrix<f64>, ids: &[usize], m: usize) -> Vec<Vec<usize>> {
    (0..theta.ncols())
        .map(|c| {
            let mut order: Vec<usize> = (0..theta.nrows()).collect();
            order.sort_by(|&x, &y| theta[(y, c)].total_cmp(&theta[(x, c)]).then(x.cmp(&y)));
            order.into_iter().take(m).map(|i| ids[i]).collect()
        })
        .collect()
}

/// Retries the merge with growing neighborhoods when the representatives'
/// own pure clusters share no edges.
fn align_halves(
    a: &SparseSymmetric,
    half_s: &Half,
    half_sbar: &Half,
    split: &Bipartition,
) -> Result<Alignment> {
    match merge_bipartitions(&half_s.selection.clusters, &half_sbar.selection.clusters, a) {
        Err(Error::MergeFailure) => {}
        other => return other,
    }
    let mut m = 8;
    let limit = split.s.len().max(split.s_bar.len());
    loop {
        let grow = |half: &Half, ids: &[usize]| -> Vec<Vec<usize>> {
            half.selection
                .clusters
                .iter()
                .zip(top_members(&half.estimate.theta, ids, m))
                .map(|(c, top)| {
                    let mut v = c.clone();
                    v.extend(top.into_iter().filter(|i| !c.contains(i)));
                    v
                })
                .collect()
        };
        match merge_bipartitions(&grow(half_s, &split.s), &grow(half_sbar, &split.s_bar), a) {
            Err(Error::MergeFailure) if m < limit => m *= 4,
            other => return other,
        }
    }
}

/// Fits memberships, community strengths and sparsity to a symmetric
/// nonnegative matrix (a sampled adjacency matrix, or a probability matrix
/// with `opts.noiseless`).
pub fn fit<R: Rng + ?Sized>(a: &SparseSymmetric, k: usize, opts: &FitOptions, rng: &mut R) -> Result<FitResult> {
    let n = a.n();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let degrees = row_degrees(a);
    let active = degrees.d.iter().filter(|&&d| d > 0.0).count();
    if active < 2 * k {
        return Err(Error::invalid(format!(
            "graph has {active} non-isolated nodes, need at least {}",
            2 * k
        )));
    }

    let (raw_theta, beta, halves, split, alignment) = if opts.split {
        let split = split_nodes(n, k, rng).stage("split")?;
        let half_sbar = fit_half(a, &split.s_bar, &split.s, k, opts, rng).stage("S-bar half")?;
        let half_s = fit_half(a, &split.s, &split.s_bar, k, opts, rng).stage("S half")?;
        let alignment = align_halves(a, &half_s, &half_sbar, &split).stage("merge")?;

        let perm = &alignment.permutation;
        let mut raw = DMatrix::zeros(n, k);
        for (r, &node) in split.s.iter().enumerate() {
            raw.row_mut(node).copy_from(&half_s.estimate.theta.row(r));
        }
        for (r, &node) in split.s_bar.iter().enumerate() {
            for c in 0..k {
                raw[(node, perm[c])] = half_sbar.estimate.theta[(r, c)];
            }
        }
        let mut beta = half_s.estimate.beta_raw.clone();
        for c in 0..k {
            beta[perm[c]] = 0.5 * (beta[perm[c]] + half_sbar.estimate.beta_raw[c]);
        }
        let halves = [half_s, half_sbar]
            .into_iter()
            .map(|h| HalfDiagnostics {
                selection: h.selection,
                beta_raw: h.estimate.beta_raw,
                eigenvalues: h.eigenvalues,
            })
            .collect();
        (raw, beta, halves, Some(split), Some(alignment))
    } else {
        let eig = top_k_eigs_with(a, k, &opts.eig).stage("eigendecomposition")?;
        let x = compute_embedding_full(&degrees, &eig).stage("embedding")?;
        let selection = adapt_eps0(&x, &degrees, k, n, &opts.search(), rng).stage("pure-node selection")?;
        let est = recover_parameters(&x, &selection.representatives, &degrees, opts.kappa_max)
            .stage("parameter recovery")?;
        let diag = HalfDiagnostics {
            selection,
            beta_raw: est.beta_raw.clone(),
            eigenvalues: eig.values,
        };
        (est.theta, est.beta_raw, vec![diag], None, None)
    };

    let rho_hat = beta.iter().copied().fold(0.0, f64::max);
    let b_hat = beta.iter().map(|b| b / rho_hat).collect();
    let (theta_hat, degenerate_rows) = normalize_theta(&raw_theta);
    Ok(FitResult {
        theta_hat,
        raw_theta,
        b_hat,
        rho_hat,
        halves,
        split,
        alignment,
        degenerate_rows,
    })
}

/// Zero-degree check used by callers that want to report isolated nodes.
pub fn isolated_nodes(a: &SparseSymmetric) -> Vec<usize> {
    let d: DegreeDiagonal = row_degrees(a);
    (0..d.len()).filter(|&i| d.d[i] == 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_cases() {
        let raw = DMatrix::from_row_slice(3, 2, &[0.5, 0.5, -0.1, 1.1, 0.0, 0.0]);
        let (t, flagged) = normalize_theta(&raw);
        assert_eq!(t.row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert_eq!(t.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(t.row(2).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert_eq!(flagged, vec![2]);
    }

    #[test]
    fn normalize_handles_nan() {
        let raw = DMatrix::from_row_slice(1, 2, &[f64::NAN, 1.0]);
        let (t, flagged) = normalize_theta(&raw);
        assert_eq!(t.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert!(flagged.is_empty());
    }
}
