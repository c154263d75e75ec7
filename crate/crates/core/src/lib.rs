// SPDX-License-Identifier: MIT OR Apache-2.0

//! # circuitscope-core
//!
//! Causal feature-to-feature circuit tracing over layered models whose hidden
//! states are read through TopK sparse-autoencoder dictionaries, plus the
//! downstream analytics that turn an edge table into biology-facing summaries.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! checkpoint persistence, parallel drivers and the CLI live in the
//! `circuitscope` companion crate.
//!
//! Pipeline at a glance:
//!
//! 1. [`model`] builds a layered model (a toy transformer or a planted-linear
//!    model with known ground-truth circuits) and synthetic cells.
//! 2. [`sae`] encodes hidden states into sparse codes.
//! 3. [`tracer`] ablates one source feature at a time, replays the model from
//!    the ablated layer and accumulates per-target activation deltas with
//!    [`stats::EdgeAccumulator`].
//! 4. [`graph`], [`knowledge`] and [`validate`] analyse the resulting edges.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod feature;
pub mod fixture;
pub mod graph;
pub mod knowledge;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sae;
pub mod stats;
pub mod tracer;
pub mod validate;

pub use error::{Error, Result};
pub use feature::FeatureId;
