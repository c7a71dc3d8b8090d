//! File formats, configuration, synthetic corpora, and the batch pipeline
//! behind the `semff` command-line tool.
//!
//! The algorithms live in `semff-core`; this crate owns everything that
//! touches the filesystem: frame and feature-file IO ([`ingest`]), config
//! resolution ([`config`]), the stage orchestration with its artifact writer
//! ([`pipeline`]), and generators for the synthetic corpora the tests run on
//! ([`synth`]).

pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod synth;

pub use error::{CliError, Result};
