//! Library surface of the command-line tool, exposed for integration tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
