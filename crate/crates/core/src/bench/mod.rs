//! Data generation, Monte Carlo sweeps and CSV persistence for the
//! simulation studies.

mod config;
mod data;
mod experiment;
mod nystrom;
mod records;

pub use config::{Arm, ExperimentConfig, LambdaRule, MRule};
pub use data::{ceil_sqrt, design_points, generate_data, Design, FStar};
pub use experiment::{
    derive_seed, flatness_ratio, rate_factor, run_error_vs_n, sketch_dim, summarize,
    upper_half, SummaryRow, DATA_STREAM,
};
pub use nystrom::{run_nystrom_failure_demo, NystromFailureReport};
pub use records::{read_csv, write_csv, write_csv_to, TrialRecord, CSV_HEADER};
