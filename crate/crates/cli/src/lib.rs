//! Library surface of the CLI harness: document formats and the subcommand
//! implementations, exposed so integration tests can drive them directly.

pub mod commands;
pub mod formats;
