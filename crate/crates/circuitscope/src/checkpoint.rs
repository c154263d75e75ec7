// SPDX-License-Identifier: MIT OR Apache-2.0

//! Checkpoint files: one JSON header line describing the run and the
//! accumulator layout, then the raw accumulators as little-endian binary
//! (`n, mean, m2, pos, neg, zero` per accumulator, 48 bytes each).

use std::fs;
use std::path::Path;

use circuitscope_core::stats::EdgeAccumulator;
use circuitscope_core::tracer::{PassCounts, SourceBlock, TargetBlock, TraceCheckpoint, TraceState};
use circuitscope_core::FeatureId;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const CHECKPOINT_FORMAT: &str = "circuitscope-checkpoint/1";
const RECORD: usize = 48;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    config_hash: String,
    cells_done: usize,
    passes: Vec<PassCounts>,
    blocks: Vec<BlockLayout>,
}

#[derive(Serialize, Deserialize)]
struct BlockLayout {
    source: FeatureId,
    /// `(target layer, accumulator count)`.
    targets: Vec<(usize, usize)>,
}

pub fn encode_checkpoint(ckpt: &TraceCheckpoint) -> Vec<u8> {
    let s = &ckpt.state;
    let header = Header {
        format: CHECKPOINT_FORMAT.into(),
        config_hash: format!("{:016x}", ckpt.config_hash),
        cells_done: s.cells_done,
        passes: s.passes.clone(),
        blocks: s
            .blocks
            .iter()
            .map(|b| BlockLayout { source: b.source, targets: b.targets.iter().map(|t| (t.layer, t.accumulators.len())).collect() })
            .collect(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for acc in s.blocks.iter().flat_map(|b| &b.targets).flat_map(|t| &t.accumulators) {
        out.extend_from_slice(&acc.n.to_le_bytes());
        out.extend_from_slice(&acc.mean.to_le_bytes());
        out.extend_from_slice(&acc.m2.to_le_bytes());
        out.extend_from_slice(&acc.pos.to_le_bytes());
        out.extend_from_slice(&acc.neg.to_le_bytes());
        out.extend_from_slice(&acc.zero.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<TraceCheckpoint> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::format(path, "missing checkpoint header"))?;
    let header: Header = serde_json::from_slice(&bytes[..nl]).at(path)?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::format(path, format!("unsupported checkpoint format {:?}", header.format)));
    }
    let config_hash = u64::from_str_radix(&header.config_hash, 16).map_err(|_| Error::format(path, "bad config hash"))?;
    let body = &bytes[nl + 1..];
    let total: usize = header.blocks.iter().flat_map(|b| &b.targets).map(|t| t.1).sum();
    if body.len() != total * RECORD {
        return Err(Error::format(path, format!("expected {} accumulator bytes, found {}", total * RECORD, body.len())));
    }
    let mut records = body.chunks_exact(RECORD).map(|r| {
        let word = |i: usize| <[u8; 8]>::try_from(&r[i * 8..i * 8 + 8]).expect("8 bytes");
        EdgeAccumulator {
            n: u64::from_le_bytes(word(0)),
            mean: f64::from_le_bytes(word(1)),
            m2: f64::from_le_bytes(word(2)),
            pos: u64::from_le_bytes(word(3)),
            neg: u64::from_le_bytes(word(4)),
            zero: u64::from_le_bytes(word(5)),
        }
    });
    let blocks = header
        .blocks
        .into_iter()
        .map(|b| SourceBlock {
            source: b.source,
            targets: b
                .targets
                .into_iter()
                .map(|(layer, n)| TargetBlock { layer, accumulators: records.by_ref().take(n).collect() })
                .collect(),
        })
        .collect();
    Ok(TraceCheckpoint { config_hash, state: TraceState { cells_done: header.cells_done, blocks, passes: header.passes } })
}

pub fn write_checkpoint(path: &Path, ckpt: &TraceCheckpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(&tmp, encode_checkpoint(ckpt)).at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

pub fn read_checkpoint(path: &Path) -> Result<TraceCheckpoint> {
    decode_checkpoint(&fs::read(path).at(path)?, path)
}
