//! File formats, run orchestration and analysis tables around `recom-core`.
//!
//! Every command is a function here; the binary only parses flags.

pub mod analyze;
pub mod checkpoint;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod graph_file;
pub mod run;

pub use error::CliError;
