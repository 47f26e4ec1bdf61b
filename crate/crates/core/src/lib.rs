//! Mixed-membership stochastic blockmodel: simulation, spectral inference of
//! memberships and community strengths, and evaluation.

pub mod error;
pub mod eval;
pub mod geonmf;
pub mod harness;
pub mod model;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use geonmf::{fit, FitOptions, FitResult, PickRule};
pub use harness::{run_experiment, ExperimentConfig, ExperimentKind, ResultRow};
pub use model::{AdjacencyMatrix, MmsbParams, ProbabilityMatrix};
pub use sparse::{CsrMatrix, SparseSymmetric};
pub use spectral::{estimate_k_usvt, top_k_eigs, EigOptions, EigenPair};
