//! Command-line orchestration and the HTTP service for the toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod cli;
pub mod config;
pub mod http;
pub mod io;
pub mod modelling;
pub mod pipeline;

pub use cli::{run, Cli, EXIT_RUNTIME, EXIT_USAGE};
