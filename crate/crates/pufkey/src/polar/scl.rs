//! Successive cancellation list decoding.
//!
//! Runs the SC schedule over a list of candidate paths. Each unfrozen leaf
//! forks every path into both decisions; the `list_size` best penalty
//! metrics survive, ties broken by path order. The penalty for a decision
//! disagreeing with its leaf LLR is the LLR magnitude, so with a list of
//! one the decoder degenerates to plain SC bit for bit.
//!
//! In hash-aided mode the final answer is the best-metric path accepted by
//! a caller-supplied validity predicate; if none passes, the best-metric
//! path is returned and flagged as a fallback.

use super::{f_minsum, g_update, DecoderConfig, PolarCode, SoftObservation};

#[derive(Clone)]
struct Path {
    llr: Vec<Vec<f64>>,
    bits: Vec<Vec<u8>>,
    u_hat: Vec<u8>,
    metric: f64,
}

impl Path {
    fn new(block_len: usize, channel_llr: &[f64]) -> Self {
        let levels = block_len.trailing_zeros() as usize + 1;
        let mut llr: Vec<Vec<f64>> = (0..levels).map(|l| vec![0.0; block_len >> l]).collect();
        llr[0].copy_from_slice(channel_llr);
        Self {
            llr,
            bits: (0..levels).map(|l| vec![0u8; block_len >> l]).collect(),
            u_hat: vec![0u8; block_len],
            metric: 0.0,
        }
    }
}

/// Result of a list decode.
#[derive(Clone, Debug)]
pub struct SclOutcome {
    /// Selected path's full input vector.
    pub u_hat: Vec<u8>,
    /// `None` without hash aiding; `Some(true)` when a path passed the
    /// validity predicate; `Some(false)` when the decoder fell back to the
    /// best metric because no path passed.
    pub predicate_matched: Option<bool>,
}

/// List-decode an observation. `validity` is consulted only when
/// `config.hash_aided` is set; candidates are offered best metric first.
pub fn scl_decode(
    obs: &SoftObservation,
    frozen_values: &[u8],
    code: &PolarCode,
    config: &DecoderConfig,
    validity: Option<&dyn Fn(&[u8]) -> bool>,
) -> SclOutcome {
    config.validate().expect("invalid decoder config");
    let n = code.block_len();
    assert_eq!(obs.len(), n, "observation length must equal block length");
    let frozen_full = code.scatter_frozen(frozen_values).expect("frozen value count");
    let mut paths = vec![Path::new(n, obs.llr())];
    decode_span(code, &frozen_full, config.list_size, 0, 0, &mut paths);
    // stable by construction order, so metric ties keep path order
    paths.sort_by(|a, b| a.metric.partial_cmp(&b.metric).unwrap());
    if config.hash_aided {
        if let Some(pred) = validity {
            if let Some(hit) = paths.iter().find(|p| pred(&p.u_hat)) {
                return SclOutcome { u_hat: hit.u_hat.clone(), predicate_matched: Some(true) };
            }
            return SclOutcome {
                u_hat: paths[0].u_hat.clone(),
                predicate_matched: Some(false),
            };
        }
    }
    SclOutcome { u_hat: paths[0].u_hat.clone(), predicate_matched: None }
}

fn decode_span(
    code: &PolarCode,
    frozen_full: &[u8],
    list_size: usize,
    level: usize,
    u_base: usize,
    paths: &mut Vec<Path>,
) {
    let len = code.block_len() >> level;
    if len == 1 {
        leaf(code, frozen_full, list_size, level, u_base, paths);
        return;
    }
    let half = len / 2;
    for p in paths.iter_mut() {
        for i in 0..half {
            p.llr[level + 1][i] = f_minsum(p.llr[level][i], p.llr[level][i + half]);
        }
    }
    decode_span(code, frozen_full, list_size, level + 1, u_base, paths);
    for p in paths.iter_mut() {
        let (a, b) = p.bits.split_at_mut(level + 1);
        a[level][..half].copy_from_slice(&b[0][..half]);
        for i in 0..half {
            p.llr[level + 1][i] = g_update(p.llr[level][i], p.llr[level][i + half], a[level][i]);
        }
    }
    decode_span(code, frozen_full, list_size, level + 1, u_base + half, paths);
    for p in paths.iter_mut() {
        let (a, b) = p.bits.split_at_mut(level + 1);
        for i in 0..half {
            let q = b[0][i];
            a[level][i] ^= q;
            a[level][i + half] = q;
        }
    }
}

/// Penalty for deciding `bit` against LLR `llr`.
#[inline]
fn penalty(llr: f64, bit: u8) -> f64 {
    if (bit == 0 && llr < 0.0) || (bit == 1 && llr > 0.0) {
        llr.abs()
    } else {
        0.0
    }
}

fn leaf(
    code: &PolarCode,
    frozen_full: &[u8],
    list_size: usize,
    level: usize,
    index: usize,
    paths: &mut Vec<Path>,
) {
    if code.is_frozen(index) {
        let bit = frozen_full[index];
        for p in paths.iter_mut() {
            p.metric += penalty(p.llr[level][0], bit);
            p.u_hat[index] = bit;
            p.bits[level][0] = bit;
        }
        return;
    }
    // fork every path into both decisions, keep the best list_size metrics
    let mut candidates: Vec<(f64, usize, u8)> = Vec::with_capacity(paths.len() * 2);
    for (pi, p) in paths.iter().enumerate() {
        let llr = p.llr[level][0];
        candidates.push((p.metric + penalty(llr, 0), pi, 0));
        candidates.push((p.metric + penalty(llr, 1), pi, 1));
    }
    if candidates.len() > list_size {
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        candidates.truncate(list_size);
        // restore generation order so parent states are cloned predictably
        candidates.sort_by_key(|&(_, pi, bit)| (pi, bit));
    }
    let parents = std::mem::take(paths);
    for &(metric, pi, bit) in &candidates {
        let mut p = parents[pi].clone();
        p.metric = metric;
        p.u_hat[index] = bit;
        p.bits[level][0] = bit;
        paths.push(p);
    }
}
