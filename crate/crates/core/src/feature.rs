// SPDX-License-Identifier: MIT OR Apache-2.0

use core::fmt;
use core::str::FromStr;

use crate::error::{contract_err, Error};

/// A dictionary feature at a given layer, written `L<layer>_F<index>`.
///
/// The model a feature belongs to is carried by the condition label of the
/// graph or catalog that holds it, not by the id itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureId {
    pub layer: usize,
    pub index: usize,
}

impl FeatureId {
    pub const fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}_F{}", self.layer, self.index)
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || contract_err!("malformed feature id {s:?}, expected L<layer>_F<index>");
        let rest = s.strip_prefix('L').ok_or_else(bad)?;
        let (layer, index) = rest.split_once("_F").ok_or_else(bad)?;
        Ok(Self {
            layer: layer.parse().map_err(|_| bad())?,
            index: index.parse().map_err(|_| bad())?,
        })
    }
}
