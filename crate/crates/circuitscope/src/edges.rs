// SPDX-License-Identifier: MIT OR Apache-2.0

//! Edge table CSV.
//!
//! ```text
//! # seed=7
//! # config_hash=00000000deadbeef
//! source_layer,source_feature,target_layer,target_feature,cohens_d,consistency,n_cells,sign
//! 0,3,1,12,-4.25,1,200,inhibitory
//! ```
//!
//! Leading `# key=value` lines carry run metadata. Floats use the shortest
//! representation that parses back to the same value, so parsing and
//! re-emitting a file reproduces it byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use circuitscope_core::tracer::{CausalEdge, EdgeSign};
use circuitscope_core::FeatureId;

use crate::error::{Error, IoContext, Result};

pub const EDGE_HEADER: &str =
    "source_layer,source_feature,target_layer,target_feature,cohens_d,consistency,n_cells,sign";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeTable {
    /// Header metadata in file order.
    pub meta: Vec<(String, String)>,
    pub edges: Vec<CausalEdge>,
}

impl EdgeTable {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value.to_string(),
            None => self.meta.push((key.into(), value.to_string())),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            writeln!(s, "# {k}={v}").unwrap();
        }
        s.push_str(EDGE_HEADER);
        s.push('\n');
        for e in &self.edges {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                e.source.layer,
                e.source.index,
                e.target.layer,
                e.target.index,
                e.d,
                e.consistency,
                e.n,
                e.sign.as_str()
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut table = EdgeTable::default();
        let mut lines = text.lines().enumerate();
        let mut header_seen = false;
        for (i, line) in lines.by_ref() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::format(path, format!("line {}: metadata is not key=value", i + 1)))?;
                table.meta.push((k.into(), v.into()));
            } else if line == EDGE_HEADER {
                header_seen = true;
                break;
            } else {
                return Err(Error::format(path, format!("line {}: expected the edge header", i + 1)));
            }
        }
        if !header_seen {
            return Err(Error::format(path, "missing edge header"));
        }
        for (i, line) in lines {
            let bad = |what: &str| Error::format(path, format!("line {}: {what}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad("expected 8 fields"));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
            let float = |s: &str| s.parse::<f64>().ok().filter(|v| !v.is_nan()).ok_or_else(|| bad("bad number"));
            let sign = EdgeSign::parse(f[7]).ok_or_else(|| bad("sign must be inhibitory or excitatory"))?;
            let d = float(f[4])?;
            if (d < 0.0) != (sign == EdgeSign::Inhibitory) {
                return Err(bad("sign disagrees with cohens_d"));
            }
            table.edges.push(CausalEdge {
                source: FeatureId::new(int(f[0])?, int(f[1])?),
                target: FeatureId::new(int(f[2])?, int(f[3])?),
                d,
                consistency: float(f[5])?,
                n: f[6].parse().map_err(|_| bad("bad cell count"))?,
                sign,
            });
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::write_text(path, &self.to_csv())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Self::parse(&text, path)
    }
}
