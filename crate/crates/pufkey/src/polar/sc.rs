//! Successive cancellation decoding.
//!
//! Recursive half-split schedule over the natural-order transform: the
//! upper half of a span is decoded from min-sum combined LLRs, its partial
//! sums feed the lower half, and decisions happen at the leaves in index
//! order. Frozen leaves take the supplied value, unfrozen leaves decide 0
//! on non-negative LLR (ties to 0).

use super::{f_minsum, g_update, PolarCode, SoftObservation};

/// Per-decode scratch: one LLR buffer and one partial-sum buffer per
/// recursion level, reused across spans of the same level.
pub(crate) struct ScWorkspace {
    /// llr[level] has length block_len >> level.
    llr: Vec<Vec<f64>>,
    /// bits[level] holds the transform-domain partial sums of the span
    /// currently being assembled at that level.
    bits: Vec<Vec<u8>>,
}

impl ScWorkspace {
    pub(crate) fn new(block_len: usize) -> Self {
        let levels = block_len.trailing_zeros() as usize + 1;
        Self {
            llr: (0..levels).map(|l| vec![0.0; block_len >> l]).collect(),
            bits: (0..levels).map(|l| vec![0u8; block_len >> l]).collect(),
        }
    }
}

/// Decode a noisy observation into the full input vector, forcing the
/// supplied values (ascending frozen-index order) at frozen positions.
///
/// Panics if the observation length or frozen-value count does not match
/// the code; both are structural programming errors rather than data
/// errors.
pub fn sc_decode(obs: &SoftObservation, frozen_values: &[u8], code: &PolarCode) -> Vec<u8> {
    let n = code.block_len();
    assert_eq!(obs.len(), n, "observation length must equal block length");
    let frozen_full = code.scatter_frozen(frozen_values).expect("frozen value count");
    let mut ws = ScWorkspace::new(n);
    ws.llr[0].copy_from_slice(obs.llr());
    let mut u_hat = vec![0u8; n];
    decode_span(code, &frozen_full, &mut ws, 0, 0, &mut u_hat);
    u_hat
}

/// Decode the span of length `block_len >> level` whose first input index
/// is `u_base`, reading LLRs from `ws.llr[level]` and leaving the span's
/// transform-domain bits in `ws.bits[level]`.
fn decode_span(
    code: &PolarCode,
    frozen_full: &[u8],
    ws: &mut ScWorkspace,
    level: usize,
    u_base: usize,
    u_hat: &mut [u8],
) {
    let len = code.block_len() >> level;
    if len == 1 {
        let bit = if code.is_frozen(u_base) {
            frozen_full[u_base]
        } else {
            u8::from(ws.llr[level][0] < 0.0)
        };
        u_hat[u_base] = bit;
        ws.bits[level][0] = bit;
        return;
    }
    let half = len / 2;
    for i in 0..half {
        ws.llr[level + 1][i] = f_minsum(ws.llr[level][i], ws.llr[level][i + half]);
    }
    decode_span(code, frozen_full, ws, level + 1, u_base, u_hat);
    // stash the upper partial sums before the lower recursion reuses the
    // child buffer
    let (bits_here, bits_child) = {
        let (a, b) = ws.bits.split_at_mut(level + 1);
        (&mut a[level], &mut b[0])
    };
    bits_here[..half].copy_from_slice(&bits_child[..half]);
    for i in 0..half {
        ws.llr[level + 1][i] =
            g_update(ws.llr[level][i], ws.llr[level][i + half], ws.bits[level][i]);
    }
    decode_span(code, frozen_full, ws, level + 1, u_base + half, u_hat);
    let (bits_here, bits_child) = {
        let (a, b) = ws.bits.split_at_mut(level + 1);
        (&mut a[level], &mut b[0])
    };
    for i in 0..half {
        let q = bits_child[i];
        bits_here[i] ^= q;
        bits_here[i + half] = q;
    }
}
