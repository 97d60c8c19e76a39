//! File formats, configuration, parallel search and the `tsd` command line
//! on top of [`tsdst_core`].

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use commands::{run, Command};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};
