//! Configuration, pipelines and file output for the `meanfield` command.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;

pub use artifacts::{write_report, Check, Report, RunArtifacts, Table};
pub use config::RunConfig;
pub use error::{Result, RunError};
pub use pipeline::{run, Subcommand};
