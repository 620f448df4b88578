//! Command-line pipeline around `pgrad-core`: configuration, CSV/JSON export
//! and SVG figures.

pub mod config;
pub mod error;
pub mod format;
pub mod gridio;
pub mod pipeline;
pub mod plots;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use pipeline::main_with;
