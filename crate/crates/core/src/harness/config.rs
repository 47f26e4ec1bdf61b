use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which parameter the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// `beta = (0.5 - e, 0.5, 0.5 + e)`; grid over `e`.
    SkewB,
    /// `B = diag(beta - e) + e 1 1^T`; grid over `e`.
    Offdiag,
    /// Grid over the Dirichlet concentration.
    Alpha0,
    /// `beta = 1`; grid over `rho`.
    Rho,
    /// `B = diag(0.35 + 0.65 r)` with `r ~ U(0,1)^K`; grid over `K`.
    K,
    /// `B = diag(0.5 + 0.5 r)`; grid over `n`, runtime recorded.
    Timing,
    /// One configuration, `replicates` times.
    Single,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SkewB => "skew_b",
            ExperimentKind::Offdiag => "offdiag",
            ExperimentKind::Alpha0 => "alpha0",
            ExperimentKind::Rho => "rho",
            ExperimentKind::K => "k",
            ExperimentKind::Timing => "timing",
            ExperimentKind::Single => "single",
        }
    }

    fn default_grid(self) -> Vec<f64> {
        match self {
            ExperimentKind::SkewB => vec![0.0, 0.1, 0.2, 0.3, 0.4],
            ExperimentKind::Offdiag => vec![0.0, 0.05, 0.1, 0.15, 0.2],
            ExperimentKind::Alpha0 => vec![0.25, 0.5, 1.0, 2.0, 4.0],
            ExperimentKind::Rho => vec![0.1, 0.2, 0.4, 0.7, 1.0],
            ExperimentKind::K => vec![2.0, 3.0, 4.0, 5.0, 6.0],
            ExperimentKind::Timing => vec![500.0, 1000.0, 2000.0, 4000.0],
            ExperimentKind::Single => vec![0.0],
        }
    }
}

/// A sweep description. Every field except `experiment` has a default, so
/// `{"experiment": "skew_b"}` is a complete config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "one")]
    pub alpha0: f64,
    /// Defaults to 0.7 for `alpha0`, 1 otherwise.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Diagonal strengths for `offdiag`, `alpha0`, `rho` and `single`.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    /// Defaults depend on `experiment`.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Use the two-half split inside `fit`.
    #[serde(default)]
    pub split: bool,
    /// One-hot rows planted per community.
    #[serde(default)]
    pub pure_per_community: usize,
    #[serde(default = "yes")]
    pub self_loops: bool,
    /// Sets `rho` so the expected degree is about this value. Defaults to 100
    /// for `timing`.
    #[serde(default)]
    pub average_degree: Option<f64>,
    /// Write measured wall time. Defaults to true for `timing` only; other
    /// sweeps write 0 so their output is byte-reproducible.
    #[serde(default)]
    pub record_runtime: Option<bool>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_n() -> usize {
    1000
}
fn default_k() -> usize {
    3
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_replicates() -> usize {
    10
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            n: default_n(),
            k: default_k(),
            alpha0: 1.0,
            rho: None,
            beta: None,
            grid: None,
            replicates: default_replicates(),
            seed: 0,
            split: false,
            pure_per_community: 0,
            self_loops: true,
            average_degree: None,
            record_runtime: None,
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(|| self.experiment.default_grid())
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(if self.experiment == ExperimentKind::Alpha0 {
            0.7
        } else {
            1.0
        })
    }

    pub fn average_degree(&self) -> Option<f64> {
        match (self.average_degree, self.experiment) {
            (Some(d), _) => Some(d),
            (None, ExperimentKind::Timing) => Some(100.0),
            _ => None,
        }
    }

    pub fn record_runtime(&self) -> bool {
        self.record_runtime
            .unwrap_or(self.experiment == ExperimentKind::Timing)
    }

    /// Diagonal strengths before any grid-dependent change.
    pub fn base_beta(&self) -> Vec<f64> {
        if let Some(b) = &self.beta {
            return b.clone();
        }
        match self.experiment {
            ExperimentKind::Alpha0 => scaled_default(self.k, 0.4),
            ExperimentKind::Rho => vec![1.0; self.k],
            _ => scaled_default(self.k, 0.6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let grid = self.grid();
        if grid.is_empty() {
            return bad("grid must be non-empty".into());
        }
        if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
            return bad(format!("grid values must be finite, got {v}"));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!("alpha0 must be positive, got {}", self.alpha0));
        }
        let rho = self.rho();
        if !(rho > 0.0 && rho <= 1.0) {
            return bad(format!("rho must lie in (0, 1], got {rho}"));
        }
        if let Some(d) = self.average_degree {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("average_degree must be positive, got {d}"));
            }
        }
        let beta = self.base_beta();
        let uses_beta = matches!(
            self.experiment,
            ExperimentKind::Offdiag | ExperimentKind::Alpha0 | ExperimentKind::Rho | ExperimentKind::Single
        );
        if uses_beta && beta.len() != self.k {
            return bad(format!("beta has {} entries but k = {}", beta.len(), self.k));
        }
        if self.beta.is_some() && !uses_beta {
            return bad(format!("beta is fixed by the {} experiment", self.experiment.name()));
        }
        for &v in &grid {
            let ok = match self.experiment {
                ExperimentKind::SkewB => self.k == 3 && (0.0..0.5).contains(&v),
                ExperimentKind::Offdiag => v >= 0.0 && beta.iter().all(|&b| v <= b),
                ExperimentKind::Alpha0 => v > 0.0,
                ExperimentKind::Rho => v > 0.0 && v <= 1.0,
                ExperimentKind::K | ExperimentKind::Timing => v >= 1.0 && v.fract() == 0.0,
                ExperimentKind::Single => true,
            };
            if !ok {
                return bad(format!("grid value {v} is invalid for the {} experiment", self.experiment.name()));
            }
        }
        let n_min = match self.experiment {
            ExperimentKind::Timing => grid.iter().copied().fold(f64::INFINITY, f64::min) as usize,
            _ => self.n,
        };
        let k_max = match self.experiment {
            ExperimentKind::K => grid.iter().copied().fold(0.0, f64::max) as usize,
            _ => self.k,
        };
        if n_min < 2 * k_max || self.pure_per_community * k_max > n_min {
            return bad(format!("n = {n_min} is too small for k = {k_max}"));
        }
        Ok(())
    }
}

/// `(lo, ..., 1)` evenly spaced; `(0.6, 0.8, 1)` for `k = 3, lo = 0.6`.
fn scaled_default(k: usize, lo: f64) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    (0..k).map(|i| lo + (1.0 - lo) * i as f64 / (k - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment": "skew_b"}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.n, 1000);
        assert_eq!(cfg.replicates, 10);
        assert_eq!(cfg.grid().len(), 5);
        assert!(!cfg.split);
        assert!(!cfg.record_runtime());
    }

    #[test]
    fn panel_defaults() {
        let c = ExperimentConfig::new(ExperimentKind::Alpha0);
        assert_eq!(c.rho(), 0.7);
        assert_eq!(c.base_beta(), vec![0.4, 0.7, 1.0]);
        let c = ExperimentConfig::new(ExperimentKind::Offdiag);
        assert_eq!(c.base_beta(), vec![0.6, 0.8, 1.0]);
        let c = ExperimentConfig::new(ExperimentKind::Timing);
        assert!(c.record_runtime());
        assert_eq!(c.average_degree(), Some(100.0));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "skew_b", "nn": 3}"#).is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Rho);
        c.grid = Some(vec![]);
        assert!(c.validate().is_err());
        c.grid = Some(vec![1.5]);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Offdiag);
        c.grid = Some(vec![0.7]);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Single);
        c.replicates = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Single);
        c.beta = Some(vec![1.0, 1.0]);
        assert!(c.validate().is_err());
    }
}
