//! Batch front-end: run configurations, parameter sweeps and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_with_mode, ConfigError, Mode, Point, RunConfig};
pub use run::{execute, render_csv, render_meta, run, Row, Status};
