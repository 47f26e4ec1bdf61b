//! Simulation sweeps, file formats and result persistence.

mod config;
mod experiment;
mod io;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiment::{
    child_seed, evaluate_fit, generate_instance, run_experiment, run_experiment_with_threads, summarize, Instance,
    Metrics, ResultRow, SummaryRow,
};
pub use io::{
    format_float, load_edge_list, load_ground_truth, read_matrix_csv, write_edge_list, write_matrix_csv,
    write_results, write_summary, RESULTS_HEADER, SUMMARY_HEADER,
};
