use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::spectral::{DegreeDiagonal, EigenPair};

/// Relative floor below which a top-K eigenvalue counts as zero.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Degree-normalized spectral coordinates, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub x: DMatrix<f64>,
    pub row_norms: Vec<f64>,
    /// Rows whose degree was zero; their coordinates are zero.
    pub isolated: Vec<usize>,
}

impl SpectralEmbedding {
    pub fn new(x: DMatrix<f64>, isolated: Vec<usize>) -> Self {
        let row_norms = x.row_iter().map(|r| r.norm()).collect();
        SpectralEmbedding {
            x,
            row_norms,
            isolated,
        }
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.x.select_rows(idx)
    }
}

/// Fails if any of the top-K eigenvalues sits at or below `1e-12 * lambda_1`.
pub fn check_positive_spectrum(eig: &EigenPair) -> Result<()> {
    let top = eig.values.first().copied().unwrap_or(0.0);
    let floor = EIGEN_FLOOR * top.max(0.0);
    for (index, &value) in eig.values.iter().enumerate() {
        if !(value > floor) {
            return Err(Error::RankDeficiency { index, value, floor });
        }
    }
    Ok(())
}

fn scale_rows(mut x: DMatrix<f64>, d: &DegreeDiagonal) -> SpectralEmbedding {
    let mut isolated = Vec::new();
    for (i, &di) in d.d.iter().enumerate() {
        if di > 0.0 {
            x.row_mut(i).unscale_mut(di.sqrt());
        } else {
            x.row_mut(i).fill(0.0);
            isolated.push(i);
        }
    }
    SpectralEmbedding::new(x, isolated)
}

/// `D21^(-1/2) A21 V1 E1^(-1/2)`: rows of the held-out half projected on the
/// top eigenvectors of the other half.
pub fn compute_embedding(a21: &CsrMatrix, d21: &DegreeDiagonal, eig1: &EigenPair) -> Result<SpectralEmbedding> {
    check_positive_spectrum(eig1)?;
    if d21.len() != a21.nrows() {
        return Err(Error::invalid(format!(
            "{} degrees for a block with {} rows",
            d21.len(),
            a21.nrows()
        )));
    }
    if eig1.vectors.nrows() != a21.ncols() {
        return Err(Error::invalid("eigenvectors do not match the block's columns"));
    }
    let mut x = a21.mul_dense(&eig1.vectors);
    for (c, &l) in eig1.values.iter().enumerate() {
        x.column_mut(c).unscale_mut(l.sqrt());
    }
    Ok(scale_rows(x, d21))
}

/// `D^(-1/2) V E^(1/2)` on the whole graph (no sample split).
pub fn compute_embedding_full(d: &DegreeDiagonal, eig: &EigenPair) -> Result<SpectralEmbedding> {
    check_positive_spectrum(eig)?;
    if d.len() != eig.vectors.nrows() {
        return Err(Error::invalid("degree vector does not match eigenvectors"));
    }
    let mut x = eig.vectors.clone();
    for (c, &l) in eig.values.iter().enumerate() {
        x.column_mut(c).scale_mut(l.sqrt());
    }
    Ok(scale_rows(x, d))
}
