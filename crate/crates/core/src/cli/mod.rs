//! Batch pipeline behind the `combo` binary: configuration and one function
//! per subcommand, with file handoff through the output directory.

mod commands;
mod config;

pub use commands::*;
pub use config::*;
