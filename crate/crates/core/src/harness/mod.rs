//! Seeded ensembles, distribution comparisons, diagnostics and export.

pub mod check;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod export;
pub mod report;
pub mod stats;

pub use check::{check_records, CheckOptions, CheckReport};
pub use config::{Arm, ExperimentConfig, Mode};
pub use diagnostics::{interlacing_check, regularity_check, rigidity_check, RegularityReport, RigidityReport};
pub use ensemble::{goe_reference, run_edge_ensemble, run_ensemble, run_gdm_ensemble, ReplicateRecord};
pub use export::{export, read_records_csv, write_records_csv, CsvRecord};
pub use report::{summarize, Summary};
pub use stats::{ks_two_sample, ComparisonReport};
