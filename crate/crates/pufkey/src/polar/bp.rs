//! Belief propagation decoding on the polar factor graph.
//!
//! The graph is the encoder butterfly network laid out as `stages + 1`
//! columns of `block_len` nodes: column 0 is the input side, column
//! `stages` the transform side. Messages sweep left-to-right then
//! right-to-left once per iteration; decoding stops when the input-side
//! hard decisions repeat across iterations (or an outer validity check
//! accepts them) or the iteration budget runs out. Frozen positions carry
//! saturated priors and are forced in the output either way.
//!
//! Check-node updates use the exact boxplus rather than its min-sum
//! approximation, and every message saturates at [`LLR_MAX`]: with
//! hundreds of saturated priors in play, min-sum's overshoot and unbounded
//! additive growth both measurably raise the block error rate here.

use super::{DecoderConfig, PolarCode, SoftObservation, LLR_MAX};

/// Check-node combine used by the message passing; exact boxplus here
/// instead of the min-sum shortcut (see module docs).
#[inline]
fn f_combine(a: f64, b: f64) -> f64 {
    // ln((1 + e^{a+b}) / (e^a + e^b)) computed stably via max-log with a
    // correction term
    let apb = a + b;
    let mag = a.abs().min(b.abs());
    let sign = a.signum() * b.signum();
    let corr = (1.0 + (-apb.abs()).exp()).ln() - (1.0 + (-(a - b).abs()).exp()).ln();
    sign * mag + corr
}

/// Decode result with convergence diagnostics.
#[derive(Clone, Debug)]
pub struct BpOutcome {
    pub u_hat: Vec<u8>,
    /// Iterations actually run (including the one that confirmed
    /// stability or passed the validity check).
    pub iterations: usize,
    /// False when the budget expired before decisions stabilized or a
    /// validity check accepted them.
    pub converged: bool,
}

/// Belief propagation with the supplied frozen values (ascending
/// frozen-index order) as saturated priors.
pub fn bp_decode(
    obs: &SoftObservation,
    frozen_values: &[u8],
    code: &PolarCode,
    config: &DecoderConfig,
) -> BpOutcome {
    bp_decode_with_validity(obs, frozen_values, code, config, None)
}

/// [`bp_decode`] with an outer-code-aided stop: each iteration's hard
/// decisions are offered to `validity`, and the sweep stops on acceptance.
/// Message passing oscillates through distinct near-solutions on this
/// graph, so letting an outer check sample every iteration recovers blocks
/// a fixed-point-only stop would miss.
pub fn bp_decode_with_validity(
    obs: &SoftObservation,
    frozen_values: &[u8],
    code: &PolarCode,
    config: &DecoderConfig,
    validity: Option<&dyn Fn(&[u8]) -> bool>,
) -> BpOutcome {
    config.validate().expect("invalid decoder config");
    let n = code.block_len();
    let stages = code.stages() as usize;
    assert_eq!(obs.len(), n, "observation length must equal block length");
    let frozen_full = code.scatter_frozen(frozen_values).expect("frozen value count");

    // right[s][i]: message entering stage-s processing from the left at
    // column s; left[s][i]: message entering from the right at column s.
    let mut right = vec![vec![0.0f64; n]; stages + 1];
    let mut left = vec![vec![0.0f64; n]; stages + 1];
    for (i, r) in right[0].iter_mut().enumerate() {
        if code.is_frozen(i) {
            *r = if frozen_full[i] == 0 { LLR_MAX } else { -LLR_MAX };
        }
    }
    left[stages].copy_from_slice(obs.llr());

    let mut decisions = vec![0u8; n];
    let mut prev = vec![0u8; n];
    let mut iterations = 0;
    let mut converged = false;
    for iter in 1..=config.max_iterations {
        iterations = iter;
        // left-to-right sweep
        for s in 0..stages {
            let h = 1usize << s;
            let (r_in, r_out) = {
                let (a, b) = right.split_at_mut(s + 1);
                (&a[s], &mut b[0])
            };
            let l_in = &left[s + 1];
            let mut base = 0;
            while base < n {
                for j in base..base + h {
                    let (ra, rb) = (r_in[j], r_in[j + h]);
                    let (lc, ld) = (l_in[j], l_in[j + h]);
                    relax(&mut r_out[j], f_combine(ra, ld + rb));
                    relax(&mut r_out[j + h], f_combine(ra, lc) + rb);
                }
                base += 2 * h;
            }
        }
        // right-to-left sweep
        for s in (0..stages).rev() {
            let h = 1usize << s;
            let (l_out, l_in) = {
                let (a, b) = left.split_at_mut(s + 1);
                (&mut a[s], &b[0])
            };
            let r_in = &right[s];
            let mut base = 0;
            while base < n {
                for j in base..base + h {
                    let (ra, rb) = (r_in[j], r_in[j + h]);
                    let (lc, ld) = (l_in[j], l_in[j + h]);
                    relax(&mut l_out[j], f_combine(lc, ld + rb));
                    relax(&mut l_out[j + h], f_combine(ra, lc) + ld);
                }
                base += 2 * h;
            }
        }
        for i in 0..n {
            let belief = right[0][i] + left[0][i];
            decisions[i] = if code.is_frozen(i) { frozen_full[i] } else { u8::from(belief < 0.0) };
        }
        if let Some(check) = validity {
            if check(&decisions) {
                converged = true;
                break;
            }
        }
        if iter > 1 && decisions == prev {
            converged = true;
            break;
        }
        prev.copy_from_slice(&decisions);
    }
    BpOutcome { u_hat: decisions, iterations, converged }
}

/// Message update with saturation. Clamping keeps additive updates from
/// compounding across iterations into beliefs no amount of contrary
/// evidence could overturn.
#[inline]
fn relax(slot: &mut f64, computed: f64) {
    *slot = computed.clamp(-LLR_MAX, LLR_MAX);
}
