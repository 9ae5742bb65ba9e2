//! Dataset ingestion, flat configuration files, run manifests and result
//! writers.

pub mod config;
pub mod manifest;
pub mod parse;
pub mod write;

pub use config::KvConfig;
pub use manifest::{sha256_hex, RunManifest};
pub use parse::{parse_regression_csv, parse_regression_reader, parse_survival_csv, parse_survival_reader};
pub use write::{fmt_f64, read_draws, write_curve, write_draws, write_summary};
