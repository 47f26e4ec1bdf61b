use nalgebra::DMatrix;
use serde::Serialize;

use super::embedding::SpectralEmbedding;
use super::pure::condition_number;
use crate::error::{Error, Result};
use crate::spectral::DegreeDiagonal;

/// Default bound on the condition number of the representative rows.
pub const KAPPA_MAX: f64 = 1e8;

/// Parameter estimates from one embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfEstimate {
    /// Unnormalized memberships, one row per embedded node.
    pub theta: DMatrix<f64>,
    /// `rho * beta_a` before normalization.
    pub beta_raw: Vec<f64>,
    pub rho: f64,
    /// `beta_raw / rho`; max entry exactly 1.
    pub b_diag: Vec<f64>,
    /// Condition number of the representative rows as used in the solve.
    pub kappa: f64,
}

/// Recovers memberships and community strengths from an embedding and its
/// `K` representative rows `sp`.
///
/// `beta_a = d[sp_a] * ||x[sp_a]||^2`, and the memberships are
/// `D^(1/2) X Xp^(-1) Dp^(-1/2)`, computed by a linear solve against `Xp^T`.
pub fn recover_parameters(
    x: &SpectralEmbedding,
    sp: &[usize],
    d21: &DegreeDiagonal,
    kappa_max: f64,
) -> Result<HalfEstimate> {
    let k = x.k();
    if sp.len() != k {
        return Err(Error::invalid(format!("need {k} representatives, got {}", sp.len())));
    }
    if d21.len() != x.len() {
        return Err(Error::invalid("degree vector does not match embedding rows"));
    }
    let xp = x.rows(sp);
    let kappa = condition_number(&xp);
    if !(kappa <= kappa_max) {
        return Err(Error::IllConditioned { kappa, kappa_max });
    }
    let beta_raw: Vec<f64> = sp
        .iter()
        .map(|&i| d21.d[i] * x.row_norms[i] * x.row_norms[i])
        .collect();
    let rho = beta_raw.iter().copied().fold(0.0, f64::max);
    if !(rho > 0.0) {
        return Err(Error::IllConditioned { kappa, kappa_max });
    }
    let b_diag = beta_raw.iter().map(|b| b / rho).collect();

    // Y Xp = X  <=>  Xp^T Y^T = X^T
    let lu = xp.transpose().lu();
    let yt = lu
        .solve(&x.x.transpose())
        .ok_or(Error::IllConditioned { kappa, kappa_max })?;
    let dp_sqrt: Vec<f64> = sp.iter().map(|&i| d21.d[i].sqrt()).collect();
    let theta = DMatrix::from_fn(x.len(), k, |i, a| d21.d[i].max(0.0).sqrt() * yt[(a, i)] / dp_sqrt[a]);
    Ok(HalfEstimate {
        theta,
        beta_raw,
        rho,
        b_diag,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_rows_map_to_basis() {
        // Rows 0 and 1 are orthogonal "pure" rows; row 2 is a 30/70 mixture.
        let d = DegreeDiagonal { d: vec![4.0, 9.0, 6.0] };
        let w = DMatrix::from_row_slice(3, 2, &[0.8, 0.0, 0.0, 0.5, 0.3 * 0.8, 0.7 * 0.5]);
        let mut x = w.clone();
        for i in 0..3 {
            x.row_mut(i).unscale_mut(d.d[i].sqrt());
        }
        let emb = SpectralEmbedding::new(x, Vec::new());
        let est = recover_parameters(&emb, &[0, 1], &d, KAPPA_MAX).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.3, 0.7]);
        assert!((est.theta - expected).norm() < 1e-12);
        assert!((est.beta_raw[0] - 0.64).abs() < 1e-12);
        assert!((est.beta_raw[1] - 0.25).abs() < 1e-12);
        assert_eq!(est.rho, est.beta_raw[0]);
        assert_eq!(est.b_diag.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn singular_pure_set_rejected() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let emb = SpectralEmbedding::new(x, Vec::new());
        let d = DegreeDiagonal { d: vec![1.0, 1.0] };
        assert!(matches!(
            recover_parameters(&emb, &[0, 1], &d, KAPPA_MAX),
            Err(Error::IllConditioned { .. })
        ));
    }
}
