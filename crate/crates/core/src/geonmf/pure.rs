//! Pure-node detection: the candidate set of near-maximal-norm rows, the
//! greedy radius-`tau` covering that keeps one representative per cluster,
//! and the `eps0` sweep that looks for a well-conditioned representative set.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::embedding::SpectralEmbedding;
use crate::error::{Error, Result};
use crate::spectral::DegreeDiagonal;

/// `eps0` values tried in order: `0.01 * 2^j` for `j = 0..=6`, capped at 0.5.
pub const EPS0_GRID: [f64; 7] = [0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.5];

/// Geometric midpoints of [`EPS0_GRID`], tried only when no grid value gives
/// exactly `K` representatives.
pub const EPS0_REFINE: [f64; 6] = [
    0.01 * std::f64::consts::SQRT_2,
    0.02 * std::f64::consts::SQRT_2,
    0.04 * std::f64::consts::SQRT_2,
    0.08 * std::f64::consts::SQRT_2,
    0.16 * std::f64::consts::SQRT_2,
    0.4,
];

/// How the covering picks its next uncovered row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickRule {
    /// Uniformly at random among uncovered rows.
    #[default]
    Random,
    /// The uncovered row with the largest norm (lowest index on ties).
    LargestNorm,
}

/// Rows with `||x_i|| >= (1 - eps0) * max_j ||x_j||`.
pub fn candidate_pure_set(x: &SpectralEmbedding, eps0: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&eps0) {
        return Err(Error::invalid(format!("eps0 must lie in [0, 1), got {eps0}")));
    }
    let max = x.row_norms.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::EmptyCandidates);
    }
    let thr = (1.0 - eps0) * max;
    Ok((0..x.len()).filter(|&i| x.row_norms[i] >= thr).collect())
}

/// Covering radius `sqrt(K / (4n) * min_F d / max_F d)` over degrees of the
/// held-out half's own block.
pub fn pure_node_tau(k: usize, n: usize, d2: &DegreeDiagonal, f: &[usize]) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &i in f {
        let d = d2.d[i];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(hi > 0.0) {
        return Err(Error::DegenerateDegrees);
    }
    Ok((k as f64 / (4.0 * n as f64) * (lo / hi)).sqrt())
}

/// Result of the greedy covering.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Row indices picked as cluster centers, in pick order.
    pub selected: Vec<usize>,
    /// `assignment[i]` is the position in `selected` whose ball covered row `i`.
    pub assignment: Vec<usize>,
}

pub fn partition_pure_nodes<R: Rng + ?Sized>(
    rows: &DMatrix<f64>,
    tau: f64,
    pick: PickRule,
    rng: &mut R,
) -> Partition {
    let m = rows.nrows();
    let norms: Vec<f64> = rows.row_iter().map(|r| r.norm()).collect();
    let mut assignment = vec![usize::MAX; m];
    let mut uncovered: Vec<usize> = (0..m).collect();
    let mut selected = Vec::new();
    while !uncovered.is_empty() {
        let s = match pick {
            PickRule::Random => uncovered[rng.random_range(0..uncovered.len())],
            PickRule::LargestNorm => {
                let mut best = uncovered[0];
                for &i in &uncovered[1..] {
                    if norms[i] > norms[best] {
                        best = i;
                    }
                }
                best
            }
        };
        let label = selected.len();
        selected.push(s);
        let center = rows.row(s);
        uncovered.retain(|&i| {
            if i == s || (rows.row(i) - center).norm() <= tau {
                assignment[i] = label;
                false
            } else {
                true
            }
        });
    }
    Partition {
        selected,
        assignment,
    }
}

/// Condition number of `rows` after scaling each row to unit length.
///
/// Pure-node rows are mutually orthogonal and differ only in length, so this
/// is 1 for an exactly pure set.
pub fn purity_condition_number(rows: &DMatrix<f64>) -> f64 {
    let mut unit = rows.clone();
    for mut r in unit.row_iter_mut() {
        let n = r.norm();
        if n > 0.0 {
            r.unscale_mut(n);
        }
    }
    condition_number(&unit)
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let hi = sv.max();
    let lo = sv.min();
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Settings for [`adapt_eps0`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureSearch {
    /// Fixed threshold; `None` sweeps [`EPS0_GRID`].
    pub eps0: Option<f64>,
    /// Accept the first selection whose purity condition number is at most this.
    pub kappa_accept: f64,
    pub pick: PickRule,
}

/// Representatives chosen for one embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PureNodeSelection {
    /// The candidate set `F` (row indices).
    pub candidates: Vec<usize>,
    /// One row index per community.
    pub representatives: Vec<usize>,
    /// Candidate rows covered by each representative (representative first).
    pub clusters: Vec<Vec<usize>>,
    pub tau: f64,
    pub eps0: f64,
    /// [`purity_condition_number`] of the representative rows.
    pub condition_number: f64,
}

impl PureNodeSelection {
    /// Same selection with row indices translated through `ids`.
    pub fn relabel(&self, ids: &[usize]) -> PureNodeSelection {
        let map = |v: &[usize]| v.iter().map(|&i| ids[i]).collect::<Vec<_>>();
        PureNodeSelection {
            candidates: map(&self.candidates),
            representatives: map(&self.representatives),
            clusters: self.clusters.iter().map(|c| map(c)).collect(),
            ..*self
        }
    }
}

/// Sweeps `eps0` until the covering yields exactly `k` representatives with
/// purity condition number within `search.kappa_accept`. Falls back to the
/// best-conditioned `k`-representative selection seen. If the grid never
/// yields `k` representatives, the same rules run over [`EPS0_REFINE`].
pub fn adapt_eps0<R: Rng + ?Sized>(
    x: &SpectralEmbedding,
    d2: &DegreeDiagonal,
    k: usize,
    n: usize,
    search: &PureSearch,
    rng: &mut R,
) -> Result<PureNodeSelection> {
    if x.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let passes: Vec<Vec<f64>> = match search.eps0 {
        Some(e) => vec![vec![e]],
        None => vec![EPS0_GRID.to_vec(), EPS0_REFINE.to_vec()],
    };
    for grid in passes {
        if let Some(sel) = sweep(x, d2, k, n, &grid, search, rng)? {
            return Ok(sel);
        }
    }
    Err(Error::PureSetNotFound { k })
}

fn sweep<R: Rng + ?Sized>(
    x: &SpectralEmbedding,
    d2: &DegreeDiagonal,
    k: usize,
    n: usize,
    grid: &[f64],
    search: &PureSearch,
    rng: &mut R,
) -> Result<Option<PureNodeSelection>> {
    let mut best: Option<PureNodeSelection> = None;
    for &eps0 in grid {
        let candidates = candidate_pure_set(x, eps0)?;
        let tau = match pure_node_tau(k, n, d2, &candidates) {
            Ok(t) if t > 0.0 => t,
            _ => continue,
        };
        let part = partition_pure_nodes(&x.rows(&candidates), tau, search.pick, rng);
        if part.selected.len() != k {
            continue;
        }
        let representatives: Vec<usize> = part.selected.iter().map(|&p| candidates[p]).collect();
        let mut clusters: Vec<Vec<usize>> = representatives.iter().map(|&r| vec![r]).collect();
        for (pos, &label) in part.assignment.iter().enumerate() {
            let node = candidates[pos];
            if node != representatives[label] {
                clusters[label].push(node);
            }
        }
        let kappa = purity_condition_number(&x.rows(&representatives));
        let selection = PureNodeSelection {
            candidates,
            representatives,
            clusters,
            tau,
            eps0,
            condition_number: kappa,
        };
        if kappa <= search.kappa_accept {
            return Ok(Some(selection));
        }
        if best.as_ref().is_none_or(|b| kappa < b.condition_number) {
            best = Some(selection);
        }
    }
    Ok(best)
}
