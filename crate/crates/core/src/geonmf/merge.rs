//! Aligning community labels between the two halves of a split fit.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::munkres;
use crate::sparse::SparseSymmetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignStrategy {
    Identity,
    /// Connected components of the graph on the representatives.
    Components,
    /// Assignment on cross-edge density between pure neighborhoods.
    Density,
}

/// `permutation[c]` is the `S`-half community matched to `S-bar` community `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alignment {
    pub permutation: Vec<usize>,
    pub strategy: AlignStrategy,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Matching by components of the bipartite graph between the two halves'
/// representatives. `None` unless there are exactly `K` components, each
/// holding one representative from each half.
fn align_by_components(reps_s: &[usize], reps_sbar: &[usize], a: &SparseSymmetric) -> Option<Vec<usize>> {
    let k = reps_s.len();
    let mut ds = DisjointSet::new(2 * k);
    for (i, &u) in reps_s.iter().enumerate() {
        for (j, &v) in reps_sbar.iter().enumerate() {
            if a.get(u, v) > 0.0 {
                ds.union(i, k + j);
            }
        }
    }
    let mut perm = vec![usize::MAX; k];
    let mut comp_s = vec![usize::MAX; 2 * k];
    for i in 0..k {
        let r = ds.find(i);
        if comp_s[r] != usize::MAX {
            return None;
        }
        comp_s[r] = i;
    }
    for j in 0..k {
        let r = ds.find(k + j);
        let i = comp_s[r];
        if i == usize::MAX || perm[j] != usize::MAX {
            return None;
        }
        perm[j] = i;
    }
    let mut seen = vec![false; k];
    for &i in &perm {
        if seen[i] {
            return None;
        }
        seen[i] = true;
    }
    Some(perm)
}

/// Total edge weight between `u` and `v` over `|u| * |v|`.
fn cross_density(u: &[usize], v: &[usize], a: &SparseSymmetric) -> f64 {
    if u.is_empty() || v.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &i in u {
        let (cols, vals) = a.row(i);
        for &j in v {
            if let Ok(pos) = cols.binary_search(&j) {
                total += vals[pos];
            }
        }
    }
    total / (u.len() * v.len()) as f64
}

/// Aligns the `S-bar` half's communities to the `S` half's.
///
/// `pure_s[c]` lists node ids (representative first) of community `c`'s pure
/// neighborhood in `S`; likewise `pure_sbar` for `S-bar`. Tries the
/// component rule on representatives first and falls back to an assignment
/// maximizing cross-edge density between neighborhoods.
pub fn merge_bipartitions(
    pure_s: &[Vec<usize>],
    pure_sbar: &[Vec<usize>],
    a: &SparseSymmetric,
) -> Result<Alignment> {
    let k = pure_s.len();
    if pure_sbar.len() != k || pure_s.iter().chain(pure_sbar).any(|c| c.is_empty()) {
        return Err(Error::invalid("both halves need one non-empty pure set per community"));
    }
    if k == 1 {
        return Ok(Alignment {
            permutation: vec![0],
            strategy: AlignStrategy::Identity,
        });
    }
    let reps_s: Vec<usize> = pure_s.iter().map(|c| c[0]).collect();
    let reps_sbar: Vec<usize> = pure_sbar.iter().map(|c| c[0]).collect();
    if let Some(permutation) = align_by_components(&reps_s, &reps_sbar, a) {
        return Ok(Alignment {
            permutation,
            strategy: AlignStrategy::Components,
        });
    }

    let density = DMatrix::from_fn(k, k, |i, j| cross_density(&pure_s[i], &pure_sbar[j], a));
    if density.iter().all(|&d| d == 0.0) {
        return Err(Error::MergeFailure);
    }
    let assignment = munkres(&(-&density))?;
    let mut permutation = vec![0; k];
    for (i, &j) in assignment.permutation.iter().enumerate() {
        permutation[j] = i;
    }
    Ok(Alignment {
        permutation,
        strategy: AlignStrategy::Density,
    })
}
