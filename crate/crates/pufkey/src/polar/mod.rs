//! Polar transform, frozen-set construction, and decoders.
//!
//! The transform is the n-fold Kronecker power of the kernel
//! `[[1,0],[1,1]]` applied in natural index order (no bit-reversal
//! permutation), computed with in-place butterfly passes. Over GF(2) the
//! kernel squares to the identity, so the transform is its own inverse —
//! the property the helper-data construction in [`crate::extractor`] leans
//! on.
//!
//! Frozen positions are the least reliable synthesized channels under the
//! erasure-channel Bhattacharyya recursion `Z- = 2Z - Z^2`, `Z+ = Z^2`
//! seeded with the design parameter. For the half-split successive
//! cancellation schedule used here, the first half of each span sees the
//! degraded (`Z-`) channel and the second half the upgraded (`Z+`) one.

mod bp;
mod sc;
mod scl;

pub use bp::{bp_decode, bp_decode_with_validity, BpOutcome};
pub use sc::sc_decode;
pub use scl::{scl_decode, SclOutcome};

use thiserror::Error;

/// Saturation magnitude for log-likelihood ratios. ln((1-p)/p) for any
/// representable p stays near 40 only for p ~ 4e-18, so this is effectively
/// "certain" while leaving plenty of headroom in min-sum accumulations.
pub const LLR_MAX: f64 = 40.0;

#[derive(Debug, Error, PartialEq)]
pub enum PolarError {
    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("num_frozen {num_frozen} exceeds block length {block_len}")]
    TooManyFrozen { num_frozen: usize, block_len: usize },
    #[error("design parameter {0} outside (0, 1)")]
    BadDesignParam(f64),
    #[error("input has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("LLR vector contains a non-finite entry")]
    NonFiniteLlr,
    #[error("list size {0} must be a power of two >= 1")]
    BadListSize(usize),
    #[error("max_iterations must be >= 1")]
    BadIterations,
}

/// In-place polar transform: `u <- u * F^(kron n)` over GF(2).
pub fn transform_in_place(u: &mut [u8]) -> Result<(), PolarError> {
    let n = u.len();
    if !n.is_power_of_two() {
        return Err(PolarError::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        let mut base = 0;
        while base < n {
            for j in base..base + h {
                u[j] ^= u[j + h];
            }
            base += 2 * h;
        }
        h *= 2;
    }
    Ok(())
}

/// Polar transform of a bit vector; length must be a power of two.
pub fn transform(u: &[u8]) -> Result<Vec<u8>, PolarError> {
    let mut out = u.to_vec();
    transform_in_place(&mut out)?;
    Ok(out)
}

/// A polar code instance: block length, frozen set, and the reliability
/// ordering it was derived from.
#[derive(Clone, Debug)]
pub struct PolarCode {
    block_len: usize,
    stages: u32,
    design_param: f64,
    /// Indices [0, block_len) sorted least reliable first (descending
    /// Bhattacharyya parameter), ties broken by ascending index.
    reliability_order: Vec<usize>,
    /// Frozen indices, ascending.
    frozen: Vec<usize>,
    /// Unfrozen (key-carrying) indices, ascending.
    unfrozen: Vec<usize>,
    is_frozen: Vec<bool>,
}

impl PolarCode {
    /// Derive the frozen set of the given size from the Bhattacharyya
    /// recursion seeded with `design_param` on every position.
    pub fn construct(
        block_len: usize,
        num_frozen: usize,
        design_param: f64,
    ) -> Result<Self, PolarError> {
        if !(design_param > 0.0 && design_param < 1.0) {
            return Err(PolarError::BadDesignParam(design_param));
        }
        Self::construct_with_channel(&vec![design_param; block_len], num_frozen, design_param)
    }

    /// Frozen-set construction over per-position channel qualities: entry i
    /// of `base_z` is the Bhattacharyya parameter of the channel observing
    /// transform output i. The uniform [`Self::construct`] is the special
    /// case of a constant vector. `design_param` is carried verbatim for
    /// serialization.
    pub fn construct_with_channel(
        base_z: &[f64],
        num_frozen: usize,
        design_param: f64,
    ) -> Result<Self, PolarError> {
        let block_len = base_z.len();
        if !block_len.is_power_of_two() || block_len < 2 {
            return Err(PolarError::NotPowerOfTwo(block_len));
        }
        if num_frozen > block_len {
            return Err(PolarError::TooManyFrozen { num_frozen, block_len });
        }
        if base_z.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return Err(PolarError::BadDesignParam(design_param));
        }
        let stages = block_len.trailing_zeros();
        let z = evolve_bhattacharyya(base_z);
        let mut reliability_order: Vec<usize> = (0..block_len).collect();
        // descending Z = least reliable first; ties broken by ascending index
        // (sort_by is stable over the already-ascending order)
        reliability_order.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap());
        let mut frozen: Vec<usize> = reliability_order[..num_frozen].to_vec();
        frozen.sort_unstable();
        let mut unfrozen: Vec<usize> = reliability_order[num_frozen..].to_vec();
        unfrozen.sort_unstable();
        let mut is_frozen = vec![false; block_len];
        for &i in &frozen {
            is_frozen[i] = true;
        }
        Ok(Self { block_len, stages, design_param, reliability_order, frozen, unfrozen, is_frozen })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn stages(&self) -> u32 {
        self.stages
    }

    pub fn design_param(&self) -> f64 {
        self.design_param
    }

    pub fn num_frozen(&self) -> usize {
        self.frozen.len()
    }

    pub fn num_unfrozen(&self) -> usize {
        self.unfrozen.len()
    }

    /// Frozen indices, ascending.
    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    /// Unfrozen indices, ascending.
    pub fn unfrozen(&self) -> &[usize] {
        &self.unfrozen
    }

    /// Least reliable first.
    pub fn reliability_order(&self) -> &[usize] {
        &self.reliability_order
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.is_frozen[index]
    }

    /// Expand frozen values given in ascending-frozen-index order into a
    /// full-length vector (zeros elsewhere).
    pub(crate) fn scatter_frozen(&self, frozen_values: &[u8]) -> Result<Vec<u8>, PolarError> {
        if frozen_values.len() != self.frozen.len() {
            return Err(PolarError::LengthMismatch {
                got: frozen_values.len(),
                expected: self.frozen.len(),
            });
        }
        let mut full = vec![0u8; self.block_len];
        for (&idx, &v) in self.frozen.iter().zip(frozen_values) {
            full[idx] = v & 1;
        }
        Ok(full)
    }
}

/// Bhattacharyya parameters of the synthesized input-side channels given
/// per-position output-side parameters.
///
/// Mirrors the half-split decode schedule: the transform pairs output
/// positions (i, i + half); the degraded combination `Za + Zb - Za*Zb`
/// feeds the first half of the input span and the upgraded `Za * Zb` the
/// second half, recursively. For a constant input vector this reproduces
/// the classic scalar recursion `Z- = 2Z - Z^2`, `Z+ = Z^2` with the
/// top-level op applied to the base channel first.
fn evolve_bhattacharyya(base_z: &[f64]) -> Vec<f64> {
    let len = base_z.len();
    if len == 1 {
        return base_z.to_vec();
    }
    let half = len / 2;
    let mut degraded = Vec::with_capacity(half);
    let mut upgraded = Vec::with_capacity(half);
    for i in 0..half {
        let (za, zb) = (base_z[i], base_z[i + half]);
        degraded.push((za + zb - za * zb).clamp(0.0, 1.0));
        upgraded.push(za * zb);
    }
    let mut out = evolve_bhattacharyya(&degraded);
    out.extend(evolve_bhattacharyya(&upgraded));
    out
}

/// Channel log-likelihood ratios, one per transform output position, with
/// the convention `llr = ln(P(bit = 0) / P(bit = 1))`. Magnitudes are capped
/// at [`LLR_MAX`].
#[derive(Clone, Debug)]
pub struct SoftObservation {
    llr: Vec<f64>,
}

impl SoftObservation {
    pub fn new(llr: Vec<f64>) -> Result<Self, PolarError> {
        if llr.iter().any(|v| !v.is_finite()) {
            return Err(PolarError::NonFiniteLlr);
        }
        let llr = llr.into_iter().map(|v| v.clamp(-LLR_MAX, LLR_MAX)).collect();
        Ok(Self { llr })
    }

    /// Observation of hard bits through a binary symmetric channel with
    /// crossover probability `p`: magnitude ln((1-p)/p), sign by bit value.
    pub fn from_bsc_bits(bits: &[u8], p: f64) -> Self {
        let mag = bsc_llr_magnitude(p);
        let llr = bits.iter().map(|&b| if b == 0 { mag } else { -mag }).collect();
        Self { llr }
    }

    pub fn llr(&self) -> &[f64] {
        &self.llr
    }

    pub fn len(&self) -> usize {
        self.llr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llr.is_empty()
    }
}

/// |ln((1-p)/p)| clamped to [`LLR_MAX`]. p is clamped away from {0, 1} so
/// the certain-channel case saturates instead of producing infinities.
pub fn bsc_llr_magnitude(p: f64) -> f64 {
    let p = p.clamp(1e-18, 1.0 - 1e-18);
    (((1.0 - p) / p).ln()).clamp(-LLR_MAX, LLR_MAX)
}

/// Decoder selection for regeneration and experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderAlgorithm {
    Sc,
    Scl,
    Bp,
}

/// Decoder parameters. `list_size` applies to SCL, `max_iterations` to BP,
/// and `hash_aided` selects SCL candidates with an external validity
/// predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderConfig {
    pub algorithm: DecoderAlgorithm,
    pub list_size: usize,
    pub max_iterations: usize,
    pub hash_aided: bool,
}

impl DecoderConfig {
    pub fn sc() -> Self {
        Self { algorithm: DecoderAlgorithm::Sc, list_size: 1, max_iterations: 1, hash_aided: false }
    }

    pub fn scl(list_size: usize) -> Self {
        Self {
            algorithm: DecoderAlgorithm::Scl,
            list_size,
            max_iterations: 1,
            hash_aided: false,
        }
    }

    pub fn scl_hash_aided(list_size: usize) -> Self {
        Self { hash_aided: true, ..Self::scl(list_size) }
    }

    pub fn bp(max_iterations: usize) -> Self {
        Self {
            algorithm: DecoderAlgorithm::Bp,
            list_size: 1,
            max_iterations,
            hash_aided: false,
        }
    }

    pub fn validate(&self) -> Result<(), PolarError> {
        if self.list_size == 0 || !self.list_size.is_power_of_two() {
            return Err(PolarError::BadListSize(self.list_size));
        }
        if self.max_iterations == 0 {
            return Err(PolarError::BadIterations);
        }
        Ok(())
    }

    /// Short identifier used in CSV output and diagnostics.
    pub fn id(&self) -> String {
        match self.algorithm {
            DecoderAlgorithm::Sc => "sc".to_string(),
            DecoderAlgorithm::Scl => format!("scl:{}", self.list_size),
            DecoderAlgorithm::Bp => format!("bp:{}", self.max_iterations),
        }
    }
}

/// min-sum check-node combination of two LLRs.
#[inline]
pub(crate) fn f_minsum(a: f64, b: f64) -> f64 {
    a.signum() * b.signum() * a.abs().min(b.abs())
}

/// LLR update once the partial sum `s` of the upper branch is known.
#[inline]
pub(crate) fn g_update(a: f64, b: f64, s: u8) -> f64 {
    if s == 0 {
        b + a
    } else {
        b - a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    #[test]
    fn kernel_matches_definition() {
        // (u0, u1) -> (u0 ^ u1, u1)
        assert_eq!(transform(&[1, 0]).unwrap(), vec![1, 0]);
        assert_eq!(transform(&[1, 1]).unwrap(), vec![0, 1]);
        assert_eq!(transform(&[0, 0]).unwrap(), vec![0, 0]);
        assert_eq!(transform(&[0, 1]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(transform(&[1, 0, 1]).unwrap_err(), PolarError::NotPowerOfTwo(3));
    }

    /// Brute-force oracle: build F^(kron n) as an explicit matrix and
    /// multiply.
    fn kronecker_matrix(stages: u32) -> Vec<Vec<u8>> {
        let mut mat = vec![vec![1u8]];
        for _ in 0..stages {
            let size = mat.len();
            let mut next = vec![vec![0u8; 2 * size]; 2 * size];
            for r in 0..2 * size {
                for c in 0..2 * size {
                    // F[(r>>k), (c>>k)] * M[r mod, c mod] with F = [[1,0],[1,1]]
                    let fr = r / size;
                    let fc = c / size;
                    let fbit = match (fr, fc) {
                        (0, 0) | (1, 0) | (1, 1) => 1,
                        _ => 0,
                    };
                    next[r][c] = fbit & mat[r % size][c % size];
                }
            }
            mat = next;
        }
        mat
    }

    #[test]
    fn transform_matches_matrix_oracle_at_n8() {
        let mat = kronecker_matrix(3);
        let mut rng = StreamRng::new(4);
        for _ in 0..200 {
            let u = rng.next_bits(8);
            let mut expected = vec![0u8; 8];
            for (c, e) in expected.iter_mut().enumerate() {
                for (r, &ub) in u.iter().enumerate() {
                    *e ^= ub & mat[r][c];
                }
            }
            assert_eq!(transform(&u).unwrap(), expected);
        }
    }

    #[test]
    fn involution_exhaustive_small_sizes() {
        for n in [2usize, 4, 8, 16] {
            for v in 0u32..(1 << n) {
                let u: Vec<u8> = (0..n).map(|i| ((v >> i) & 1) as u8).collect();
                let twice = transform(&transform(&u).unwrap()).unwrap();
                assert_eq!(twice, u, "n={n} v={v}");
            }
        }
    }

    #[test]
    fn involution_randomized_at_512() {
        let mut rng = StreamRng::new(21);
        for _ in 0..100 {
            let u = rng.next_bits(512);
            assert_eq!(transform(&transform(&u).unwrap()).unwrap(), u);
        }
    }

    #[test]
    fn transform_is_linear() {
        let mut rng = StreamRng::new(22);
        for _ in 0..100 {
            let a = rng.next_bits(512);
            let b = rng.next_bits(512);
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ta = transform(&a).unwrap();
            let tb = transform(&b).unwrap();
            let txor: Vec<u8> = ta.iter().zip(&tb).map(|(x, y)| x ^ y).collect();
            assert_eq!(transform(&sum).unwrap(), txor);
        }
    }

    #[test]
    fn n2_freezes_index_zero() {
        for z in [0.1, 0.5, 0.9] {
            let code = PolarCode::construct(2, 1, z).unwrap();
            assert_eq!(code.frozen(), &[0]);
        }
    }

    /// Independent oracle: walk each index's bit path through the recursion
    /// one index at a time instead of vectorized doubling.
    fn z_oracle(index: usize, stages: u32, z0: f64) -> f64 {
        let mut z = z0;
        // the most significant bit's op applies to the base channel first
        for bit in (0..stages).rev() {
            z = if (index >> bit) & 1 == 0 { 2.0 * z - z * z } else { z * z };
        }
        z
    }

    #[test]
    fn n8_half_design_frozen_set() {
        let code = PolarCode::construct(8, 5, 0.5).unwrap();
        // Verify against the per-index oracle walk.
        let z: Vec<f64> = (0..8).map(|i| z_oracle(i, 3, 0.5)).collect();
        let mut order: Vec<usize> = (0..8).collect();
        order.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap());
        let mut expect: Vec<usize> = order[..5].to_vec();
        expect.sort_unstable();
        assert_eq!(code.frozen(), &expect[..]);
        // Frozen regression value for this construction.
        assert_eq!(code.frozen(), &[0, 1, 2, 3, 4]);
        assert_eq!(code.unfrozen(), &[5, 6, 7]);
    }

    #[test]
    fn production_sizes() {
        let code = PolarCode::construct(512, 262, 0.5).unwrap();
        assert_eq!(code.num_frozen(), 262);
        assert_eq!(code.num_unfrozen(), 250);
        assert_eq!(code.block_len(), 512);
    }

    #[test]
    fn frozen_sets_nest_as_size_grows() {
        for k in [10usize, 31, 32, 63] {
            let small = PolarCode::construct(64, k, 0.5).unwrap();
            let large = PolarCode::construct(64, k + 1, 0.5).unwrap();
            let large_set: std::collections::HashSet<_> = large.frozen().iter().collect();
            assert!(small.frozen().iter().all(|i| large_set.contains(i)), "k={k}");
        }
    }

    #[test]
    fn extreme_indices_are_ordered_correctly() {
        for z in [0.2, 0.5, 0.8] {
            for nf in [1usize, 100, 255, 511] {
                let code = PolarCode::construct(512, nf, z).unwrap();
                assert!(code.is_frozen(0), "z={z} nf={nf}");
                assert!(!code.is_frozen(511), "z={z} nf={nf}");
            }
        }
    }

    #[test]
    fn construct_rejects_bad_parameters() {
        assert!(PolarCode::construct(12, 4, 0.5).is_err());
        assert!(PolarCode::construct(8, 9, 0.5).is_err());
        assert!(PolarCode::construct(8, 4, 0.0).is_err());
        assert!(PolarCode::construct(8, 4, 1.0).is_err());
    }

    #[test]
    fn soft_observation_caps_and_validates() {
        assert!(SoftObservation::new(vec![f64::NAN]).is_err());
        let obs = SoftObservation::new(vec![100.0, -77.0, 3.0]).unwrap();
        assert_eq!(obs.llr(), &[LLR_MAX, -LLR_MAX, 3.0]);
        let bsc = SoftObservation::from_bsc_bits(&[0, 1], 0.15);
        let mag = (0.85f64 / 0.15).ln();
        assert!((bsc.llr()[0] - mag).abs() < 1e-12);
        assert!((bsc.llr()[1] + mag).abs() < 1e-12);
    }
}
