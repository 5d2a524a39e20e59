//! File formats, experiment commands and SVG output on top of
//! [`ioexai_core`].
//!
//! Every file this crate writes is plain text: CSV tables, flat `key = value`
//! configs and manifests, a line-oriented model format with hexadecimal
//! floats, and standalone SVG charts. Writers are deterministic, so rerunning
//! a command with the same inputs and seed reproduces every output byte.



pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod hexfloat;
pub mod manifest;
pub mod model_file;
pub mod report;


pub mod svg;
pub mod table;

pub use error::{CliError, ExitCode};
