//! File formats, diagnostics and a thread pool around `lattice-echo-core`,
//! plus the `lattice-echo` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod io;
pub mod pool;
pub mod report;

pub use config::{parse_config, ConfigError, RunConfig};
pub use lattice_echo_core as core;
pub use pool::Pool;
pub use report::ReportJson;
