//! Command-line front end, file formats and parallel drivers for `srweyl-core`.

pub mod cli;
pub mod error;
pub mod json;
pub mod manifest;
pub mod parallel;
pub mod table;
pub mod verify;

pub use error::{CliError, Result};
