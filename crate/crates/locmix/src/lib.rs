//! File formats, reports and the command line for `locmix-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod report;

pub use error::CliError;
