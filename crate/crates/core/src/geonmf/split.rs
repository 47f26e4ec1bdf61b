use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// A random equal-sized split of the node set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bipartition {
    /// Sorted, size `ceil(n / 2)`.
    pub s: Vec<usize>,
    /// Sorted complement, size `floor(n / 2)`.
    pub s_bar: Vec<usize>,
}

pub fn split_nodes<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Bipartition> {
    if n < 2 * k.max(1) {
        return Err(Error::invalid(format!(
            "cannot split {n} nodes into halves that each hold {k} communities"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let (s, s_bar) = perm.split_at(n.div_ceil(2));
    let mut s = s.to_vec();
    let mut s_bar = s_bar.to_vec();
    s.sort_unstable();
    s_bar.sort_unstable();
    Ok(Bipartition { s, s_bar })
}
