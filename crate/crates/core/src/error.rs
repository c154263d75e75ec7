// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid dimensions or parameters when building a model, SAE or run.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A non-finite value appeared during a forward pass.
    #[error("non-finite hidden state at layer {layer}")]
    NonFinite { layer: usize },

    /// SAE training diverged.
    #[error("training diverged at step {step}: loss {loss}")]
    Training { step: usize, loss: f64 },

    /// A statistic needs more samples than it was given.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// A correlation or test statistic is undefined for the input.
    #[error("undefined statistic: {0}")]
    Undefined(&'static str),

    /// A resume checkpoint does not belong to the current run.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}

macro_rules! contract_err {
    ($($arg:tt)*) => { $crate::error::Error::Contract(alloc::format!($($arg)*)) };
}

pub(crate) use config_err;
pub(crate) use contract_err;
