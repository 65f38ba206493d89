//! Library surface of the forecasting CLI: configuration resolution, the run
//! protocol, and report rendering. The `aqcast` binary is a thin wrapper over
//! these functions.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load_config_file, resolve_config, Overrides, PcaMode, RunConfig};
pub use run::{cmd_run, RunSummary};
