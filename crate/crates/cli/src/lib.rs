//! Configuration, orchestration and file formats behind the `dyadic-lab`
//! binary.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod spec_io;
pub mod sweep;

pub use config::{parse_config, serialize_config, RunConfig};
pub use error::CliError;
pub use run::{execute, run_to_dir, RunManifest};
