//! Configuration ingestion, scenario generation and result emission for the
//! `crbsde` binary.

pub mod config;
pub mod expr;
pub mod run;

pub use config::{emit_config, parse_config, ScenarioConfig};
pub use expr::Expr;
pub use run::{run, Command, RunOptions, RunOutput, RunReport, Table, REPORT_VERSION};
