//! Configuration, experiment drivers and CSV output for the `netindep`
//! command-line tool.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{ConfigError, HarnessError};
