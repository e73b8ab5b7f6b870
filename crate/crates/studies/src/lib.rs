//! Convergence studies over `rbmlab-core`: each study sweeps a grid of
//! `(tau, N, seed)` cells, fits log-log slopes and reports pass/fail checks
//! together with the config hash and crate versions.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fit;
pub mod report;
pub mod studies;

pub use config::{CustomModel, KernelConfig, ModelConfig, StudyConfig, StudyOptions};
pub use error::{Result, StudyError};
pub use fit::SlopeFit;
pub use report::{Check, StudyReport, Table};
pub use studies::{run_study, STUDIES};
