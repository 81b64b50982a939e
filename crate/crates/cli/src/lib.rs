//! Experiment driver for the ORAS preconditioner toolkit.
//!
//! The `oras` binary is a thin layer over this crate; everything it writes can
//! also be produced programmatically through [`run_experiment`] and [`run_suite`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod error;
pub mod experiment;
pub mod suite;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_NOT_CONVERGED};
pub use experiment::{run_experiment, write_artifacts, ExperimentOutcome, Summary};
pub use suite::{load_manifest, run_suite, suite_csv, SuiteRow};
