//! Experiment driver: configuration, run records and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod record;
pub mod svg;
