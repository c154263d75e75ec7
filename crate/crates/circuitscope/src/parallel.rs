// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multi-threaded tracing.
//!
//! Cells are processed in chunks of `checkpoint_every`. Within a chunk each
//! worker traces a contiguous run of cells into its own empty state; the
//! partial states are merged in cell order before the checkpoint hook runs.
//! Deterministic mode uses one thread and the core sequential loop, so its
//! output does not depend on the machine.

use std::ops::ControlFlow;
use std::time::Instant;

use circuitscope_core::tracer::{TraceCheckpoint, TraceRun, TraceState, Tracer};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Worker threads for a run: 1 in deterministic mode, otherwise the request
/// or the available cores.
pub fn effective_threads(requested: Option<usize>, deterministic: bool) -> usize {
    if deterministic {
        return 1;
    }
    requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `tracer` from `state` to completion, calling `on_checkpoint` after
/// every full chunk except the last. A `Break` stops the run and returns the
/// checkpoint.
pub fn trace_with_threads(
    tracer: &Tracer<'_>,
    mut state: TraceState,
    threads: usize,
    mut on_checkpoint: impl FnMut(&TraceCheckpoint) -> Result<ControlFlow<()>>,
) -> Result<TraceRun> {
    let start = Instant::now();
    let now = || Some(start.elapsed().as_secs_f64());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let n = tracer.n_cells();
    let every = tracer.config().checkpoint_every;
    while state.cells_done < n {
        let end = ((state.cells_done / every + 1) * every).min(n);
        if threads <= 1 {
            tracer.process_until(&mut state, end, &now)?;
        } else {
            let cells: Vec<usize> = (state.cells_done..end).collect();
            let per = cells.len().div_ceil(threads);
            let parts: Vec<TraceState> = pool.install(|| {
                cells
                    .par_chunks(per)
                    .map(|chunk| {
                        let mut s = tracer.empty_state();
                        for &i in chunk {
                            tracer.process_cell(i, &mut s, &now)?;
                        }
                        Ok(s)
                    })
                    .collect::<circuitscope_core::Result<Vec<_>>>()
            })?;
            for p in &parts {
                state.merge_from(p)?;
            }
        }
        if state.cells_done < n && on_checkpoint(&tracer.checkpoint(&state))?.is_break() {
            return Ok(TraceRun::Interrupted(tracer.checkpoint(&state)));
        }
    }
    Ok(TraceRun::Completed(tracer.finish(state)))
}
