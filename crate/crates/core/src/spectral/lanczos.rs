//! Symmetric Lanczos with full reorthogonalization, locking and explicit
//! restart.
//!
//! Each round runs Lanczos on the operator deflated by the already locked
//! eigenvectors, `(I - L L^T) M (I - L L^T)`. Converged Ritz pairs at the top
//! of the spectrum are locked. The solve is complete once `k` pairs are
//! locked and the deflated operator's largest converged Ritz value does not
//! exceed the k-th locked eigenvalue, which also catches eigenvalues of
//! multiplicity greater than one. A round that only has to confirm this
//! stops early once, after a minimum number of steps, its top Ritz value
//! plus residual falls below the k-th locked value.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const START_SEED: u64 = 0x6c61_6e63_7a6f_7321;
const CHECK_EVERY: usize = 5;
const MAX_ROUNDS_EXTRA: usize = 24;
/// Krylov size before a confirming round may stop on the ceiling test.
const MIN_CONFIRM_BASIS: usize = 30;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn project_out(w: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(q, w);
        axpy(-c, q, w);
    }
}

fn random_unit(n: usize, seed: u64, locked: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    for _ in 0..2 {
        project_out(&mut v, locked);
    }
    let nv = norm(&v);
    if nv <= 1e-10 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    Some(v)
}

struct Ritz {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

struct RoundOutcome {
    ritz: Vec<Ritz>,
    /// Every pair returned is exact (the Krylov space became invariant).
    invariant: bool,
    /// The deflated operator's spectrum was shown to lie below the ceiling.
    below: bool,
}

fn lanczos_round(
    m: &CsrMatrix,
    start: Vec<f64>,
    locked: &[Vec<f64>],
    want: usize,
    max_basis: usize,
    tol: f64,
    ceiling: Option<f64>,
) -> RoundOutcome {
    let n = m.nrows();
    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut norm_est: f64 = 0.0;

    loop {
        let j = basis.len() - 1;
        m.mul_vec_into(&basis[j], &mut w);
        project_out(&mut w, locked);
        let a = dot(&basis[j], &w);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            project_out(&mut w, &basis);
            project_out(&mut w, locked);
        }
        let b = norm(&w);
        alphas.push(a);
        norm_est = norm_est.max(a.abs() + b + betas.last().copied().unwrap_or(0.0));

        let size = j + 1;
        let breakdown = b <= 1e-12 * norm_est.max(f64::MIN_POSITIVE);
        let full = size >= max_basis;
        let check = size >= want && (size - want) % CHECK_EVERY == 0;
        if breakdown || full || check {
            let mut t = DMatrix::zeros(size, size);
            for i in 0..size {
                t[(i, i)] = alphas[i];
                if i + 1 < size {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..size).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            let resid = |idx: usize| {
                if breakdown {
                    0.0
                } else {
                    b * eig.eigenvectors[(size - 1, idx)].abs()
                }
            };
            let top = eig.eigenvalues[order[0]].abs().max(1.0);
            let thr = tol * top;
            if let Some(c) = ceiling.filter(|_| size >= MIN_CONFIRM_BASIS.min(max_basis)) {
                if eig.eigenvalues[order[0]] + resid(order[0]) < c - thr {
                    return RoundOutcome {
                        ritz: Vec::new(),
                        invariant: false,
                        below: true,
                    };
                }
            }
            let converged = order.iter().take_while(|&&idx| resid(idx) <= thr).count();
            if breakdown || full || converged >= want {
                let keep = if breakdown { size } else { want.max(converged).min(size) };
                let ritz = order
                    .iter()
                    .take(keep)
                    .map(|&idx| {
                        let s = eig.eigenvectors.column(idx);
                        let mut y = vec![0.0; n];
                        for (c, q) in basis.iter().enumerate() {
                            axpy(s[c], q, &mut y);
                        }
                        let ny = norm(&y);
                        y.iter_mut().for_each(|v| *v /= ny);
                        Ritz {
                            value: eig.eigenvalues[idx],
                            vector: y,
                            residual: resid(idx),
                        }
                    })
                    .collect();
                return RoundOutcome {
                    ritz,
                    invariant: breakdown,
                    below: false,
                };
            }
        }
        betas.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

/// Top `k` algebraically largest eigenpairs of the symmetric matrix `m`.
/// Returns values in descending order and the matching vectors as columns.
pub(crate) fn top_k(
    m: &CsrMatrix,
    k: usize,
    tol: f64,
    max_basis: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut restart: Option<Vec<f64>> = None;
    let mut best_residual = f64::INFINITY;
    let max_rounds = 2 * k + MAX_ROUNDS_EXTRA;

    for round in 0..max_rounds {
        if locked.len() >= n {
            break;
        }
        let start = match restart.take().and_then(|mut v| {
            for _ in 0..2 {
                project_out(&mut v, &locked);
            }
            let nv = norm(&v);
            (nv > 1e-10).then(|| v.into_iter().map(|x| x / nv).collect::<Vec<_>>())
        }) {
            Some(v) => v,
            None => match (0..4).find_map(|t| random_unit(n, START_SEED ^ ((round * 4 + t) as u64), &locked)) {
                Some(v) => v,
                // The locked vectors span the whole space numerically.
                None => break,
            },
        };
        let want = k.saturating_sub(locked.len()).max(1);
        let max_basis = max_basis.min(n - locked.len()).max(1);
        let kth = if locked_vals.len() >= k {
            let mut sorted = locked_vals.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            Some(sorted[k - 1])
        } else {
            None
        };
        let outcome = lanczos_round(m, start, &locked, want, max_basis, tol, kth);
        if outcome.below {
            break;
        }
        let scale = outcome.ritz.first().map_or(1.0, |r| r.value.abs().max(1.0));
        let thr = tol * scale;

        let mut unconverged = Vec::new();
        let mut finished = false;
        for (pos, r) in outcome.ritz.into_iter().enumerate() {
            let converged = r.residual <= thr;
            if pos == 0 && converged {
                if let Some(kth) = kth {
                    if r.value <= kth + thr {
                        finished = true;
                        break;
                    }
                }
            }
            if converged || outcome.invariant {
                locked_vals.push(r.value);
                locked.push(r.vector);
            } else {
                best_residual = best_residual.min(r.residual / scale);
                unconverged.push(r.vector);
            }
        }
        if finished {
            break;
        }
        if !unconverged.is_empty() {
            let mut v = vec![0.0; n];
            for u in &unconverged {
                axpy(1.0, u, &mut v);
            }
            restart = Some(v);
        }
        if round + 1 == max_rounds {
            return Err(Error::ConvergenceFailure { best_residual });
        }
    }

    if locked.len() < k {
        return Err(Error::ConvergenceFailure { best_residual });
    }
    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&a, &b| locked_vals[b].total_cmp(&locked_vals[a]));
    let values: Vec<f64> = order.iter().take(k).map(|&i| locked_vals[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        vectors.column_mut(c).copy_from_slice(&locked[i]);
    }
    Ok((values, vectors))
}
