//! Top-K symmetric eigendecomposition, degree vectors and the USVT
//! community-count estimator.

mod lanczos;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::AdjacencyMatrix;
use crate::sparse::{CsrMatrix, SparseSymmetric};

/// Eigensolver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    /// Relative residual bound `||M v - lambda v|| <= tol * max(|lambda_1|, 1)`.
    pub tol: f64,
    /// Matrices with `n <= dense_threshold` use a full dense decomposition.
    pub dense_threshold: usize,
    /// Lanczos basis size per restart; `None` means `50 * k + 200`.
    pub max_iter: Option<usize>,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            tol: 1e-10,
            dense_threshold: 256,
            max_iter: None,
        }
    }
}

impl EigOptions {
    pub fn iterative() -> Self {
        EigOptions {
            dense_threshold: 0,
            ..Self::default()
        }
    }
}

/// The `k` algebraically largest eigenpairs of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Descending.
    pub values: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub vectors: DMatrix<f64>,
    /// Achieved `max_i ||M v_i - lambda_i v_i|| / max(|lambda_1|, 1)`.
    pub residual: f64,
}

impl EigenPair {
    pub fn k(&self) -> usize {
        self.values.len()
    }
}

/// Row sums of a (possibly rectangular) block.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDiagonal {
    pub d: Vec<f64>,
}

impl DegreeDiagonal {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

pub fn row_degrees(m: &CsrMatrix) -> DegreeDiagonal {
    DegreeDiagonal { d: m.row_sums() }
}

fn relative_residual(m: &CsrMatrix, values: &[f64], vectors: &DMatrix<f64>) -> f64 {
    let mv = m.mul_dense(vectors);
    let scale = values.first().map_or(1.0, |v| v.abs().max(1.0));
    values
        .iter()
        .enumerate()
        .map(|(i, &l)| (mv.column(i) - vectors.column(i) * l).norm())
        .fold(0.0, f64::max)
        / scale
}

fn dense_top_k(m: &CsrMatrix, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m.nrows(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn top_k_eigs(m: &SparseSymmetric, k: usize, tol: f64) -> Result<EigenPair> {
    top_k_eigs_with(
        m,
        k,
        &EigOptions {
            tol,
            ..EigOptions::default()
        },
    )
}

pub fn top_k_eigs_with(m: &SparseSymmetric, k: usize, opts: &EigOptions) -> Result<EigenPair> {
    let n = m.n();
    if k > n {
        return Err(Error::invalid(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    if k == 0 {
        return Ok(EigenPair {
            values: Vec::new(),
            vectors: DMatrix::zeros(n, 0),
            residual: 0.0,
        });
    }
    let (values, vectors) = if n <= opts.dense_threshold {
        dense_top_k(m, k)
    } else {
        let basis = opts.max_iter.unwrap_or(50 * k + 200);
        lanczos::top_k(m, k, opts.tol, basis)?
    };
    let residual = relative_residual(m, &values, &vectors);
    if !(residual <= opts.tol) {
        return Err(Error::ConvergenceFailure {
            best_residual: residual,
        });
    }
    Ok(EigenPair {
        values,
        vectors,
        residual,
    })
}

/// Count of eigenvalues `>= thr` (algebraic).
fn count_at_least(m: &SparseSymmetric, thr: f64, opts: &EigOptions) -> Result<usize> {
    let n = m.n();
    let mut k = 8.min(n);
    loop {
        let eig = top_k_eigs_with(m, k, opts)?;
        let count = eig.values.iter().filter(|&&v| v >= thr).count();
        if count < k || k == n {
            return Ok(count);
        }
        k = (2 * k).min(n);
    }
}

/// Default slack in the USVT threshold.
pub const USVT_ETA: f64 = 0.01;

/// Estimates the number of communities by counting eigenvalues of `A` with
/// `|lambda| >= (2 + eta) * sqrt(n * p_hat)`, `p_hat = sum(A) / n^2`.
pub fn estimate_k_usvt(a: &AdjacencyMatrix, eta: f64) -> Result<usize> {
    let n = a.n();
    let m = a.as_sparse();
    let total: f64 = m.row_sums().iter().sum();
    if n == 0 || total == 0.0 {
        return Ok(0);
    }
    let p_hat = total / (n as f64 * n as f64);
    let thr = (2.0 + eta) * (n as f64 * p_hat).sqrt();
    let opts = EigOptions {
        tol: 1e-8,
        ..EigOptions::default()
    };
    if n <= 2 * opts.dense_threshold {
        let values = m.to_dense().symmetric_eigenvalues();
        return Ok(values.iter().filter(|v| v.abs() >= thr).count());
    }
    let neg = SparseSymmetric::new(CsrMatrix::from_triplets(
        n,
        n,
        m.iter().map(|(i, j, v)| (i, j, -v)),
    )?)?;
    Ok(count_at_least(m, thr, &opts)? + count_at_least(&neg, thr, &opts)?)
}
