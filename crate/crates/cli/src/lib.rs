//! Command-line front end: named scenario reproductions written as CSV and
//! JSON, plus ad-hoc calibration and pricing.

pub mod commands;
pub mod csv;
pub mod error;
pub mod scenarios;

pub use error::{CliError, Result};
