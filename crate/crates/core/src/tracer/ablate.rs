// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::vec::Vec;

use crate::error::{contract_err, Result};
use crate::linalg::axpy;
use crate::model::HiddenState;
use crate::sae::{SaeDictionary, SparseCode};

/// Zeroes feature `f` at every real position of `h`.
///
/// Removing `z_f` from the code changes the reconstruction by exactly
/// `-z_f · dec_f`, which is what gets added to the hidden state. Padded
/// positions are left untouched. Returns the ablated state and, per
/// position, whether the feature was active.
pub fn ablate_at_layer(
    sae: &SaeDictionary,
    h: &HiddenState,
    f: usize,
    padding: &[bool],
) -> Result<(HiddenState, Vec<bool>)> {
    check(sae, h, f, padding)?;
    let mut scratch = alloc::vec![0.0; sae.n_features];
    let mut code = SparseCode::default();
    let mut out = h.clone();
    let mut active = alloc::vec![false; h.positions];
    for p in 0..h.positions {
        if padding[p] {
            continue;
        }
        sae.encode_with(h.position(p), &mut scratch, &mut code);
        let z = code.get(f);
        if z > 0.0 {
            axpy(-z, sae.decoder_column(f), out.position_mut(p));
            active[p] = true;
        }
    }
    Ok((out, active))
}

fn check(sae: &SaeDictionary, h: &HiddenState, f: usize, padding: &[bool]) -> Result<()> {
    if sae.layer != h.layer {
        return Err(contract_err!("SAE for layer {} applied to layer {}", sae.layer, h.layer));
    }
    if f >= sae.n_features {
        return Err(contract_err!("feature {f} outside a {}-feature dictionary", sae.n_features));
    }
    if sae.d_model != h.d_model || padding.len() != h.positions {
        return Err(contract_err!("hidden state shape does not match SAE and mask"));
    }
    Ok(())
}

/// Ablation from precomputed per-position codes; `None` when the feature is
/// inactive everywhere, in which case the ablated state equals `h`.
pub(crate) fn ablate_cached(
    sae: &SaeDictionary,
    h: &HiddenState,
    f: usize,
    codes: &[SparseCode],
    padding: &[bool],
) -> Option<HiddenState> {
    let mut out: Option<HiddenState> = None;
    for p in 0..h.positions {
        if padding[p] {
            continue;
        }
        let z = codes[p].get(f);
        if z > 0.0 {
            let state = out.get_or_insert_with(|| h.clone());
            axpy(-z, sae.decoder_column(f), state.position_mut(p));
        }
    }
    out
}
