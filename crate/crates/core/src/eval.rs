//! Label alignment and accuracy metrics.
//!
//! Communities are only identified up to a permutation, so every metric here
//! first aligns the estimated columns to the ground-truth columns with an
//! optimal linear assignment.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Optimal assignment: `permutation[a]` is the ground-truth column matched
/// to estimated column `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentResult {
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials, O(K^3)).
pub fn munkres(cost: &DMatrix<f64>) -> Result<AssignmentResult> {
    let (rows, cols) = cost.shape();
    if rows != cols {
        return Err(Error::invalid(format!("cost matrix must be square, got {rows}x{cols}")));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cost matrix has non-finite entries"));
    }
    let n = rows;
    if n == 0 {
        return Ok(AssignmentResult {
            permutation: Vec::new(),
            cost: 0.0,
        });
    }
    // 1-based arrays; column 0 is a virtual column used to start each
    // augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0; n];
    for j in 1..=n {
        permutation[matched_row[j] - 1] = j - 1;
    }
    Ok(AssignmentResult {
        cost: assignment_cost(cost, &permutation),
        permutation,
    })
}

/// `sum_a cost[a, permutation[a]]`, summed in row order.
pub fn assignment_cost(cost: &DMatrix<f64>, permutation: &[usize]) -> f64 {
    permutation.iter().enumerate().map(|(a, &b)| cost[(a, b)]).sum()
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Column alignment minimizing `||theta_hat - theta * Pi||_F`.
///
/// Expanding the norm leaves `-2 sum_a <theta_hat[:, a], theta[:, pi(a)]>` as
/// the only permutation-dependent term, so the assignment runs on negated
/// column inner products.
pub fn align_columns(theta_hat: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<AssignmentResult> {
    check_same_shape(theta_hat, theta)?;
    let cost = -(theta_hat.transpose() * theta);
    munkres(&cost)
}

/// `||theta_hat - theta * Pi||_F / ||theta||_F` at the given alignment.
pub fn relative_error_at(theta_hat: &DMatrix<f64>, theta: &DMatrix<f64>, permutation: &[usize]) -> f64 {
    let mut sq = 0.0;
    for (a, &b) in permutation.iter().enumerate() {
        sq += (theta_hat.column(a) - theta.column(b)).norm_squared();
    }
    sq.sqrt() / theta.norm()
}

/// Permutation-minimized relative Frobenius error.
pub fn relative_error(theta_hat: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(theta_hat, theta)?;
    if theta.norm() == 0.0 {
        return Err(Error::invalid("ground truth has zero norm"));
    }
    let assignment = align_columns(theta_hat, theta)?;
    Ok(relative_error_at(theta_hat, theta, &assignment.permutation))
}

/// Spearman rank correlation. `degenerate` is set when either input is
/// constant, in which case `value` is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCorrelation {
    pub value: f64,
    pub degenerate: bool,
}

/// 1-based ranks; tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("spearman needs at least two observations"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("spearman input contains NaN"));
    }
    Ok(match pearson(&average_ranks(x), &average_ranks(y)) {
        Some(value) => RankCorrelation {
            value,
            degenerate: false,
        },
        None => RankCorrelation {
            value: 0.0,
            degenerate: true,
        },
    })
}

/// Average Spearman correlation between columns under the best matching:
/// `(1/K) max_sigma sum_i RC(theta_hat[:, i], theta[:, sigma(i)])`.
pub fn rc_avg(theta_hat: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(theta_hat, theta)?;
    let k = theta.ncols();
    if k == 0 {
        return Err(Error::invalid("rc_avg needs at least one column"));
    }
    let cols_hat: Vec<Vec<f64>> = theta_hat.column_iter().map(|c| c.iter().copied().collect()).collect();
    let cols: Vec<Vec<f64>> = theta.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut rc = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            rc[(i, j)] = spearman(&cols_hat[i], &cols[j])?.value;
        }
    }
    let assignment = munkres(&(-&rc))?;
    Ok(assignment_cost(&rc, &assignment.permutation) / k as f64)
}
