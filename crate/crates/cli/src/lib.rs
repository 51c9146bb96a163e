//! Command-line front end: configuration, run directories and subcommands.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod run;
