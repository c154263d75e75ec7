// SPDX-License-Identifier: MIT OR Apache-2.0

//! # circuitscope
//!
//! The std companion of `circuitscope-core`: model, SAE, edge-table and
//! checkpoint file formats, catalog and perturbation readers, run configs,
//! multi-threaded tracing and the `circuitscope` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod edges;
pub mod error;
pub mod parallel;
pub mod report;
pub mod synth;
pub mod tables;
pub mod tensor;

pub use error::{Error, Result};

use std::fs;
use std::path::Path;

use error::IoContext;

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, text).at(path)
}
