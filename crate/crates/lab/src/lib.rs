//! Command-line driver, file formats and acceptance suite for `phk-core`.

pub mod acceptance;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::RunError;
