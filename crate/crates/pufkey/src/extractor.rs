//! Helper-data key generation: registration, regeneration, verification,
//! and the enrollment record file format.
//!
//! Registration encodes a 131-bit stable response with the outer BCH code,
//! zero-pads it to the transform size, and applies the polar transform.
//! The transformed vector's frozen positions become public helper data; the
//! unfrozen positions are hashed into the secret key and discarded. Because
//! the transform is an involution, regeneration is plain polar decoding:
//! the noisy re-encoded response provides channel LLRs (the padding
//! positions are known zeros), the helper data pins the frozen values, and
//! the decoded vector transforms back to a near-codeword that the BCH
//! decoder finishes off. Re-encoding the recovered response and hashing the
//! unfrozen positions must reproduce the enrolled hash bit for bit.
//!
//! A literal-substitution mode skips the soft decoder entirely: transform
//! the noisy word, overwrite the frozen positions with the helper data,
//! transform back, BCH-decode. It discards all reliability information and
//! exists for comparison experiments.

use crate::bch::{BchCode, BchError};
use crate::bits::{hamming_distance, pack_msb_first, unpack_msb_first};
use crate::crc32::{checksum, Crc32};
use crate::polar::{
    bp_decode_with_validity, bsc_llr_magnitude, sc_decode, scl_decode, transform, DecoderAlgorithm,
    DecoderConfig, PolarCode, PolarError, SoftObservation, LLR_MAX,
};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Record file format version written and accepted by this crate.
pub const RECORD_VERSION: u16 = 1;
/// Identifier of the scattered known-zero padding scheme (the only one
/// defined).
pub const PADDING_SCHEME_SCATTERED: u8 = 0;

/// Seed of the fixed embedding permutation; a protocol constant, not a
/// secret.
const LAYOUT_SEED: u64 = 0x70AD_5CA7;

/// Transform positions carrying the outer codeword, in codeword-bit order;
/// the remaining positions hold the known-zero padding.
///
/// The codeword is scattered by a fixed pseudo-random permutation rather
/// than padded at the tail. Zeroing any butterfly-aligned block of
/// transform inputs pins a matching block of transform outputs to
/// constants (a tail pad zeroes the entire second half), and constants at
/// key positions would make key bits device-independent while constants
/// at helper positions waste them. Scattering keeps every transform output
/// a live function of the response. Both protocol sides derive the same
/// layout from the block and codeword lengths alone.
pub fn codeword_positions(block_len: usize, code_len: usize) -> Vec<usize> {
    assert!(code_len <= block_len);
    let mut order: Vec<usize> = (0..block_len).collect();
    let mut rng = crate::rng::StreamRng::from_parts(
        LAYOUT_SEED,
        &[block_len as u64, code_len as u64],
    );
    for i in 0..block_len - 1 {
        let j = i + rng.next_below((block_len - i) as u64) as usize;
        order.swap(i, j);
    }
    order.truncate(code_len);
    order
}

/// Scatter an outer codeword into a zero-initialized transform input.
fn embed_codeword(codeword: &[u8], block_len: usize, positions: &[usize]) -> Vec<u8> {
    let mut word = vec![0u8; block_len];
    for (&pos, &bit) in positions.iter().zip(codeword) {
        word[pos] = bit;
    }
    word
}

/// Gather the outer-codeword estimate back out of a transform vector.
fn extract_codeword(word: &[u8], positions: &[usize]) -> Vec<u8> {
    positions.iter().map(|&pos| word[pos]).collect()
}

const MAGIC: &[u8; 4] = b"PUFK";

#[derive(Debug, Error)]
pub enum ExtractorError {
    #[error(transparent)]
    Bch(#[from] BchError),
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error("response has {got} bits, the outer code expects {expected}")]
    ResponseLength { got: usize, expected: usize },
    #[error("transform size {block_len} is smaller than the outer codeword length {bch_n}")]
    BlockTooSmall { block_len: usize, bch_n: usize },
    #[error("record integrity: {0}")]
    Integrity(String),
    #[error("record format: {0}")]
    Format(String),
    #[error("unsupported record version {0}")]
    UnknownVersion(u16),
}

/// The secret side of an enrollment. Raw bits never touch disk and are
/// wiped when the value is dropped; only the hash is meant to persist.
pub struct SecretKey {
    raw_bits: Vec<u8>,
    hash: [u8; 32],
}

impl SecretKey {
    fn from_raw_bits(raw_bits: Vec<u8>) -> Self {
        let hash = key_hash(&raw_bits);
        Self { raw_bits, hash }
    }

    pub fn raw_bits(&self) -> &[u8] {
        &self.raw_bits
    }

    pub fn hash(&self) -> &[u8; 32] {
        &self.hash
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash)
    }
}

impl Drop for SecretKey {
    fn drop(&mut self) {
        for b in self.raw_bits.iter_mut() {
            // volatile so the wipe is not optimized away
            unsafe { std::ptr::write_volatile(b, 0) };
        }
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // raw bits intentionally not printed
        f.debug_struct("SecretKey").field("hash", &hex(&self.hash)).finish()
    }
}

/// SHA-256 over the key bits packed MSB-first, final partial byte
/// zero-padded.
pub fn key_hash(raw_bits: &[u8]) -> [u8; 32] {
    let packed = pack_msb_first(raw_bits);
    let mut hasher = Sha256::new();
    hasher.update(&packed);
    hasher.finalize().into()
}

/// Public enrollment output: helper data, key hash, and everything needed
/// to rebuild the codes on the regeneration side.
#[derive(Clone, Debug, PartialEq)]
pub struct EnrollmentRecord {
    pub version: u16,
    pub bch_m: u16,
    pub bch_n: u16,
    pub bch_k: u16,
    pub bch_t: u16,
    pub bch_primitive_poly: u32,
    pub polar_block_len: u32,
    pub num_frozen: u32,
    pub design_param: f64,
    /// CRC-32 of the frozen set (ascending indices as little-endian u32),
    /// so both parties can prove they derived the same set.
    pub frozen_set_crc32: u32,
    /// Cell positions the response bits came from.
    pub mask: Vec<u16>,
    /// Transformed-codeword bits at the frozen positions, ascending.
    pub helper_bits: Vec<u8>,
    pub key_hash: [u8; 32],
    pub padding_scheme: u8,
}

/// CRC-32 fingerprint of a polar code's frozen set.
pub fn frozen_set_crc32(polar: &PolarCode) -> u32 {
    let mut c = Crc32::new();
    for &i in polar.frozen() {
        c.update(&(i as u32).to_le_bytes());
    }
    c.finish()
}

/// Design-time Bhattacharyya parameter for the re-encoded parity positions.
/// Parity bits of the re-encoded noisy response carry dense, correlated
/// errors, so they are modeled as all but erased when selecting the frozen
/// set.
const PARITY_DESIGN_Z: f64 = 1.0 - 1e-9;
/// Design-time parameter for the known-zero padding positions.
const PADDING_DESIGN_Z: f64 = 1e-12;

/// Frozen-set construction matched to the regeneration channel this
/// pipeline actually presents: response positions at the design parameter,
/// re-encoded parity positions near-erased, padding positions near-perfect,
/// each at its scattered layout position.
///
/// Reproducible from the record fields alone, so both protocol sides derive
/// the same set; the record's frozen-set checksum proves it.
pub fn pipeline_polar_code(
    bch: &BchCode,
    block_len: usize,
    num_frozen: usize,
    design_param: f64,
) -> Result<PolarCode, ExtractorError> {
    if block_len < bch.n() {
        return Err(ExtractorError::BlockTooSmall { block_len, bch_n: bch.n() });
    }
    let positions = codeword_positions(block_len, bch.n());
    let mut base_z = vec![PADDING_DESIGN_Z; block_len];
    for (i, &pos) in positions.iter().enumerate() {
        base_z[pos] = if i < bch.k() { design_param } else { PARITY_DESIGN_Z };
    }
    Ok(PolarCode::construct_with_channel(&base_z, num_frozen, design_param)?)
}

/// Enroll a stable response: returns the public record and the secret key.
/// Deterministic in its inputs.
pub fn register(
    puf_bits: &[u8],
    bch: &BchCode,
    polar: &PolarCode,
) -> Result<(EnrollmentRecord, SecretKey), ExtractorError> {
    register_with_mask(puf_bits, &[], bch, polar)
}

/// [`register`] with the cell mask recorded for the regeneration side.
pub fn register_with_mask(
    puf_bits: &[u8],
    mask: &[u16],
    bch: &BchCode,
    polar: &PolarCode,
) -> Result<(EnrollmentRecord, SecretKey), ExtractorError> {
    if puf_bits.len() != bch.k() {
        return Err(ExtractorError::ResponseLength { got: puf_bits.len(), expected: bch.k() });
    }
    if polar.block_len() < bch.n() {
        return Err(ExtractorError::BlockTooSmall {
            block_len: polar.block_len(),
            bch_n: bch.n(),
        });
    }
    let codeword = bch.encode(puf_bits)?;
    let positions = codeword_positions(polar.block_len(), bch.n());
    let word = embed_codeword(&codeword, polar.block_len(), &positions);
    let transformed = transform(&word)?;
    let helper_bits: Vec<u8> = polar.frozen().iter().map(|&i| transformed[i]).collect();
    let raw_key: Vec<u8> = polar.unfrozen().iter().map(|&i| transformed[i]).collect();
    let key = SecretKey::from_raw_bits(raw_key);
    let record = EnrollmentRecord {
        version: RECORD_VERSION,
        bch_m: bch.field_degree() as u16,
        bch_n: bch.n() as u16,
        bch_k: bch.k() as u16,
        bch_t: bch.t() as u16,
        bch_primitive_poly: bch.primitive_poly(),
        polar_block_len: polar.block_len() as u32,
        num_frozen: polar.num_frozen() as u32,
        design_param: polar.design_param(),
        frozen_set_crc32: frozen_set_crc32(polar),
        mask: mask.to_vec(),
        helper_bits,
        key_hash: *key.hash(),
        padding_scheme: PADDING_SCHEME_SCATTERED,
    };
    Ok((record, key))
}

/// How regeneration combines helper data with the noisy response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RegenMode {
    /// Soft decoding with the helper bits as frozen values and the padding
    /// as known zeros.
    #[default]
    Principled,
    /// Hard substitution of the helper bits into the transformed noisy
    /// word, then inverse transform and BCH decode. No soft information.
    LiteralSubstitution,
}

/// Largest fraction of response bits the recovered secret may disagree
/// with before regeneration refuses.
///
/// The helper data over-determines the codeword at the default sizes, so a
/// capable decoder recovers the enrolled secret from the public record
/// regardless of the response it was handed. The refusal gate is what
/// makes regeneration a function of the response again: inputs beyond the
/// error-correction contract (legitimate re-reads stay under ~30%
/// disagreement, impostor devices start at 40%) are rejected instead of
/// being "corrected" all the way back to the enrolled key.
pub const DEFAULT_GATE_FRACTION: f64 = 0.35;

/// Regeneration tuning knobs beyond the decoder choice.
#[derive(Clone, Copy, Debug)]
pub struct RegenOptions {
    pub decoder: DecoderConfig,
    /// Assumed bit-flip probability of the response channel.
    pub channel_p: f64,
    pub mode: RegenMode,
    /// Multiplier on the LLR magnitude of the BCH parity positions, whose
    /// re-encoded noise is correlated rather than independent. 1.0 treats
    /// them like message positions.
    pub parity_llr_scale: f64,
    /// Response-consistency refusal threshold; 1.0 disables the gate.
    pub gate_fraction: f64,
}

impl RegenOptions {
    pub fn new(decoder: DecoderConfig, channel_p: f64) -> Self {
        Self {
            decoder,
            channel_p,
            mode: RegenMode::Principled,
            parity_llr_scale: 1.0,
            gate_fraction: DEFAULT_GATE_FRACTION,
        }
    }
}

/// Flags describing how a regeneration went.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RegenFlags {
    /// The BCH decoder rejected the polar output as uncorrectable.
    pub bch_decode_failed: bool,
    /// The recovered secret disagreed with the presented response on more
    /// than the gate fraction of bits, so regeneration refused.
    pub response_rejected: bool,
    /// BP ran out of iterations before decisions stabilized.
    pub decoder_nonconverged: bool,
    /// Hash-aided SCL found no path passing the validity check and fell
    /// back to the best metric.
    pub scl_predicate_fallback: bool,
}

/// Regeneration outcome and diagnostics.
#[derive(Clone, Debug)]
pub struct RegenResult {
    pub key_hash: [u8; 32],
    /// Whether `key_hash` equals the enrolled hash.
    pub matches: bool,
    pub diagnostics: RegenDiagnostics,
}

#[derive(Clone, Debug)]
pub struct RegenDiagnostics {
    pub decoder: String,
    pub bch_corrections: u32,
    pub decoder_iterations: u32,
    pub flags: RegenFlags,
    /// Hamming distance between the regenerated raw key and a
    /// caller-supplied ground-truth raw key.
    pub prehash_bit_errors: Option<u32>,
}

/// Regenerate from a noisy response using only the public record,
/// rebuilding both codes from the recorded parameters. See
/// [`regenerate_with`] for the cached-code variant used in tight loops.
pub fn regenerate(
    noisy_puf_bits: &[u8],
    record: &EnrollmentRecord,
    config: &DecoderConfig,
    channel_p: f64,
) -> Result<RegenResult, ExtractorError> {
    let (bch, polar) = rebuild_codes(record)?;
    regenerate_with(
        noisy_puf_bits,
        record,
        &bch,
        &polar,
        &RegenOptions::new(*config, channel_p),
        None,
    )
}

/// Rebuild and integrity-check the code pair described by a record.
///
/// The frozen set is recomputed rather than stored; the recorded checksum
/// decides between the channel-matched pipeline construction (the default
/// written by enrollment) and the plain uniform construction.
pub fn rebuild_codes(record: &EnrollmentRecord) -> Result<(BchCode, PolarCode), ExtractorError> {
    let bch = BchCode::with_primitive_poly(
        u32::from(record.bch_m),
        u32::from(record.bch_t),
        record.bch_primitive_poly,
    )?;
    if bch.n() != record.bch_n as usize || bch.k() != record.bch_k as usize {
        return Err(ExtractorError::Integrity(format!(
            "rebuilt BCH code is ({}, {}), record says ({}, {})",
            bch.n(),
            bch.k(),
            record.bch_n,
            record.bch_k
        )));
    }
    let block_len = record.polar_block_len as usize;
    let num_frozen = record.num_frozen as usize;
    let pipeline = pipeline_polar_code(&bch, block_len, num_frozen, record.design_param)?;
    if frozen_set_crc32(&pipeline) == record.frozen_set_crc32 {
        return Ok((bch, pipeline));
    }
    let uniform = PolarCode::construct(block_len, num_frozen, record.design_param)?;
    if frozen_set_crc32(&uniform) == record.frozen_set_crc32 {
        return Ok((bch, uniform));
    }
    Err(ExtractorError::Integrity(
        "frozen-set checksum matches neither construction".into(),
    ))
}

/// Regenerate with pre-built codes. Verifies that the codes match the
/// record (including the frozen-set checksum) before decoding.
pub fn regenerate_with(
    noisy_puf_bits: &[u8],
    record: &EnrollmentRecord,
    bch: &BchCode,
    polar: &PolarCode,
    opts: &RegenOptions,
    ground_truth_key: Option<&[u8]>,
) -> Result<RegenResult, ExtractorError> {
    if frozen_set_crc32(polar) != record.frozen_set_crc32 {
        return Err(ExtractorError::Integrity(
            "frozen-set checksum does not match the record".into(),
        ));
    }
    if record.helper_bits.len() != polar.num_frozen() {
        return Err(ExtractorError::Integrity(format!(
            "record has {} helper bits for {} frozen positions",
            record.helper_bits.len(),
            polar.num_frozen()
        )));
    }
    if noisy_puf_bits.len() != bch.k() {
        return Err(ExtractorError::ResponseLength {
            got: noisy_puf_bits.len(),
            expected: bch.k(),
        });
    }

    let reencoded = bch.encode(noisy_puf_bits)?;
    let positions = codeword_positions(polar.block_len(), bch.n());
    let embedded = embed_codeword(&reencoded, polar.block_len(), &positions);

    let mut decoder_iterations = 1u32;
    let mut flags = RegenFlags::default();
    let mut decoder_id = opts.decoder.id();

    let decoded_input = match opts.mode {
        RegenMode::LiteralSubstitution => {
            decoder_id = "literal".into();
            let mut substituted = transform(&embedded)?;
            for (&idx, &helper) in polar.frozen().iter().zip(&record.helper_bits) {
                substituted[idx] = helper;
            }
            substituted
        }
        RegenMode::Principled => {
            let obs = channel_observation(&embedded, &positions, bch, opts);
            match opts.decoder.algorithm {
                DecoderAlgorithm::Sc => sc_decode(&obs, &record.helper_bits, polar),
                DecoderAlgorithm::Scl => {
                    let predicate = |candidate: &[u8]| {
                        candidate_key_hash(candidate, &positions, bch, polar)
                            .map(|h| constant_time_eq(&h, &record.key_hash))
                            .unwrap_or(false)
                    };
                    let validity: Option<&dyn Fn(&[u8]) -> bool> =
                        if opts.decoder.hash_aided { Some(&predicate) } else { None };
                    let out = scl_decode(&obs, &record.helper_bits, polar, &opts.decoder, validity);
                    if out.predicate_matched == Some(false) {
                        flags.scl_predicate_fallback = true;
                    }
                    out.u_hat
                }
                DecoderAlgorithm::Bp => {
                    // outer-code-aided stop: accept an iteration's decisions
                    // once they BCH-decode to something consistent with the
                    // presented response
                    let acceptable = |candidate: &[u8]| {
                        let Ok(word) = transform(candidate) else { return false };
                        let Ok(dec) = bch.decode(&extract_codeword(&word, &positions)) else {
                            return false;
                        };
                        let distance = hamming_distance(&dec.message, noisy_puf_bits);
                        (distance as f64) <= opts.gate_fraction * bch.k() as f64
                    };
                    let out = bp_decode_with_validity(
                        &obs,
                        &record.helper_bits,
                        polar,
                        &opts.decoder,
                        Some(&acceptable),
                    );
                    decoder_iterations = out.iterations as u32;
                    flags.decoder_nonconverged = !out.converged;
                    out.u_hat
                }
            }
        }
    };

    // involution: back to the codeword domain
    let word_estimate = transform(&decoded_input)?;
    let codeword_estimate = extract_codeword(&word_estimate, &positions);
    let mut corrections = 0u32;
    let mut recovered = None;
    match bch.decode(&codeword_estimate) {
        Ok(dec) => {
            corrections = dec.corrections as u32;
            // refuse when the recovered secret is farther from the
            // presented response than the correction contract allows; the
            // public record over-determines the secret, so without this
            // check any input would "regenerate" the enrolled key
            let distance = hamming_distance(&dec.message, noisy_puf_bits);
            if (distance as f64) <= opts.gate_fraction * bch.k() as f64 {
                recovered = Some(dec.message);
            } else {
                flags.response_rejected = true;
            }
        }
        Err(BchError::DecodeFailure) => flags.bch_decode_failed = true,
        Err(e) => return Err(e.into()),
    }

    // re-run the registration pipeline on the recovered secret; refused or
    // undecodable attempts report the key the presented response itself
    // would register, which is what an impostor device actually obtains
    let accepted = recovered.is_some();
    let candidate_msg = recovered.unwrap_or_else(|| noisy_puf_bits.to_vec());
    let (_, candidate_key) = register(&candidate_msg, bch, polar)?;
    let prehash_bit_errors =
        ground_truth_key.map(|truth| hamming_distance(truth, candidate_key.raw_bits()) as u32);
    let key_hash = if accepted { *candidate_key.hash() } else { [0u8; 32] };
    let matches = constant_time_eq(&key_hash, &record.key_hash);
    Ok(RegenResult {
        key_hash,
        matches,
        diagnostics: RegenDiagnostics {
            decoder: decoder_id,
            bch_corrections: corrections,
            decoder_iterations,
            flags,
            prehash_bit_errors,
        },
    })
}

/// LLRs for the polar decoder: noisy codeword positions get symmetric
/// channel LLRs (parity positions optionally rescaled), padding positions
/// are known zeros.
fn channel_observation(
    embedded: &[u8],
    positions: &[usize],
    bch: &BchCode,
    opts: &RegenOptions,
) -> SoftObservation {
    let mag = bsc_llr_magnitude(opts.channel_p);
    let parity_mag = (mag * opts.parity_llr_scale).clamp(0.0, LLR_MAX);
    let mut magnitudes = vec![LLR_MAX; embedded.len()];
    for (i, &pos) in positions.iter().enumerate() {
        magnitudes[pos] = if i < bch.k() { mag } else { parity_mag };
    }
    let llr: Vec<f64> = embedded
        .iter()
        .zip(&magnitudes)
        .map(|(&bit, &m)| if bit == 0 { m } else { -m })
        .collect();
    SoftObservation::new(llr).expect("constructed LLRs are finite")
}

/// Key hash a decoder candidate would produce, for hash-aided selection.
fn candidate_key_hash(
    candidate: &[u8],
    positions: &[usize],
    bch: &BchCode,
    polar: &PolarCode,
) -> Result<[u8; 32], ExtractorError> {
    let word = transform(candidate)?;
    let dec = bch.decode(&extract_codeword(&word, positions))?;
    let (_, key) = register(&dec.message, bch, polar)?;
    Ok(*key.hash())
}

/// Constant-time digest comparison.
pub fn verify(candidate_hash: &[u8; 32], record: &EnrollmentRecord) -> bool {
    constant_time_eq(candidate_hash, &record.key_hash)
}

fn constant_time_eq(a: &[u8; 32], b: &[u8; 32]) -> bool {
    let mut diff = 0u8;
    for (x, y) in a.iter().zip(b.iter()) {
        diff |= x ^ y;
    }
    diff == 0
}

/// Lowercase hex of a digest.
pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// --- record file format ----------------------------------------------------

/// Serialize a record to the `PUFK` little-endian layout with a trailing
/// whole-file CRC-32.
pub fn serialize_record(record: &EnrollmentRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + record.mask.len() * 2 + record.helper_bits.len() / 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&record.version.to_le_bytes());
    out.extend_from_slice(&record.bch_m.to_le_bytes());
    out.extend_from_slice(&record.bch_n.to_le_bytes());
    out.extend_from_slice(&record.bch_k.to_le_bytes());
    out.extend_from_slice(&record.bch_t.to_le_bytes());
    out.extend_from_slice(&record.bch_primitive_poly.to_le_bytes());
    out.extend_from_slice(&record.polar_block_len.to_le_bytes());
    out.extend_from_slice(&record.num_frozen.to_le_bytes());
    out.extend_from_slice(&record.design_param.to_le_bytes());
    out.extend_from_slice(&record.frozen_set_crc32.to_le_bytes());
    out.extend_from_slice(&(record.mask.len() as u32).to_le_bytes());
    for &m in &record.mask {
        out.extend_from_slice(&m.to_le_bytes());
    }
    out.extend_from_slice(&(record.helper_bits.len() as u32).to_le_bytes());
    out.extend_from_slice(&pack_msb_first(&record.helper_bits));
    out.extend_from_slice(&record.key_hash);
    let crc = checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ExtractorError> {
        if self.pos + n > self.data.len() {
            return Err(ExtractorError::Format("truncated record".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ExtractorError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ExtractorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ExtractorError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parse and integrity-check a serialized record.
pub fn deserialize_record(bytes: &[u8]) -> Result<EnrollmentRecord, ExtractorError> {
    if bytes.len() < 4 + 2 + 4 {
        return Err(ExtractorError::Format("truncated record".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if checksum(body) != stored_crc {
        return Err(ExtractorError::Integrity("file checksum mismatch".into()));
    }
    let mut r = Reader { data: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(ExtractorError::Format("bad magic".into()));
    }
    let version = r.u16()?;
    if version != RECORD_VERSION {
        return Err(ExtractorError::UnknownVersion(version));
    }
    let bch_m = r.u16()?;
    let bch_n = r.u16()?;
    let bch_k = r.u16()?;
    let bch_t = r.u16()?;
    let bch_primitive_poly = r.u32()?;
    let polar_block_len = r.u32()?;
    let num_frozen = r.u32()?;
    let design_param = r.f64()?;
    let frozen_set_crc32 = r.u32()?;
    let mask_len = r.u32()? as usize;
    let mut mask = Vec::with_capacity(mask_len);
    for _ in 0..mask_len {
        mask.push(r.u16()?);
    }
    let helper_bit_len = r.u32()? as usize;
    if helper_bit_len != num_frozen as usize {
        return Err(ExtractorError::Format(format!(
            "{helper_bit_len} helper bits for {num_frozen} frozen positions"
        )));
    }
    let helper_bytes = r.take(helper_bit_len.div_ceil(8))?;
    let helper_bits = unpack_msb_first(helper_bytes, helper_bit_len);
    let key_hash: [u8; 32] = r
        .take(32)?
        .try_into()
        .map_err(|_| ExtractorError::Format("truncated record".into()))?;
    if r.pos != body.len() {
        return Err(ExtractorError::Format("trailing bytes after record".into()));
    }
    Ok(EnrollmentRecord {
        version,
        bch_m,
        bch_n,
        bch_k,
        bch_t,
        bch_primitive_poly,
        polar_block_len,
        num_frozen,
        design_param,
        frozen_set_crc32,
        mask,
        helper_bits,
        key_hash,
        padding_scheme: PADDING_SCHEME_SCATTERED,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset;
    use crate::rng::StreamRng;

    fn toy_codes() -> (BchCode, PolarCode) {
        let bch = BchCode::new(3, 1).unwrap();
        let polar = PolarCode::construct(8, 5, 0.5).unwrap();
        (bch, polar)
    }

    #[test]
    fn all_zero_response_hashes_the_zero_key() {
        let (bch, polar) = preset::codes();
        let (record, key) = register(&vec![0u8; 131], &bch, &polar).unwrap();
        assert!(record.helper_bits.iter().all(|&b| b == 0));
        assert!(key.raw_bits().iter().all(|&b| b == 0));
        // SHA-256 of 32 zero bytes
        let expected: [u8; 32] = Sha256::digest([0u8; 32]).into();
        assert_eq!(key.hash(), &expected);
        assert_eq!(
            key.hash_hex(),
            "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925"
        );
    }

    #[test]
    fn toy_instance_sizes() {
        let (bch, polar) = toy_codes();
        let (record, key) = register(&[1, 0, 1, 1], &bch, &polar).unwrap();
        assert_eq!(record.helper_bits.len(), 5);
        assert_eq!(key.raw_bits().len(), 3);
    }

    #[test]
    fn production_sizes() {
        let (bch, polar) = preset::codes();
        let mut rng = StreamRng::new(17);
        let (record, key) = register(&rng.next_bits(131), &bch, &polar).unwrap();
        assert_eq!(record.helper_bits.len(), 262);
        assert_eq!(key.raw_bits().len(), 250);
        assert_eq!(pack_msb_first(&record.helper_bits).len(), 33);
    }

    #[test]
    fn registration_is_linear_in_the_response() {
        let (bch, polar) = preset::codes();
        let mut rng = StreamRng::new(18);
        for _ in 0..8 {
            let a = rng.next_bits(131);
            let b = rng.next_bits(131);
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ha = register(&a, &bch, &polar).unwrap().0.helper_bits;
            let hb = register(&b, &bch, &polar).unwrap().0.helper_bits;
            let hs = register(&sum, &bch, &polar).unwrap().0.helper_bits;
            let hx: Vec<u8> = ha.iter().zip(&hb).map(|(x, y)| x ^ y).collect();
            assert_eq!(hs, hx);
        }
    }

    #[test]
    fn helper_and_key_positions_are_disjoint() {
        let (_, polar) = preset::codes();
        let frozen: std::collections::HashSet<_> = polar.frozen().iter().collect();
        assert!(polar.unfrozen().iter().all(|i| !frozen.contains(i)));
        assert_eq!(polar.frozen().len() + polar.unfrozen().len(), 512);
    }

    #[test]
    fn noiseless_regeneration_matches() {
        let (bch, polar) = preset::codes();
        let mut rng = StreamRng::new(19);
        let bits = rng.next_bits(131);
        let (record, key) = register(&bits, &bch, &polar).unwrap();
        for config in [DecoderConfig::sc(), DecoderConfig::scl(2), DecoderConfig::bp(60)] {
            let res = regenerate_with(
                &bits,
                &record,
                &bch,
                &polar,
                &RegenOptions::new(config, 0.0),
                Some(key.raw_bits()),
            )
            .unwrap();
            assert!(res.matches, "decoder {}", config.id());
            assert_eq!(res.diagnostics.bch_corrections, 0);
            assert_eq!(res.diagnostics.prehash_bit_errors, Some(0));
            assert!(verify(&res.key_hash, &record));
        }
    }

    #[test]
    fn literal_substitution_mode_round_trips_noiselessly() {
        let (bch, polar) = preset::codes();
        let mut rng = StreamRng::new(20);
        let bits = rng.next_bits(131);
        let (record, _) = register(&bits, &bch, &polar).unwrap();
        let opts = RegenOptions {
            mode: RegenMode::LiteralSubstitution,
            ..RegenOptions::new(DecoderConfig::sc(), 0.15)
        };
        let res = regenerate_with(&bits, &record, &bch, &polar, &opts, None).unwrap();
        assert!(res.matches);
        assert_eq!(res.diagnostics.decoder, "literal");
    }

    #[test]
    fn moderate_noise_regenerates_exactly() {
        let (bch, polar) = preset::codes();
        for trial in 0..20u64 {
            let mut rng = StreamRng::from_parts(21, &[trial]);
            let bits = rng.next_bits(131);
            let (record, key) = register(&bits, &bch, &polar).unwrap();
            let mut noisy = bits.clone();
            for b in noisy.iter_mut() {
                if rng.next_bool(0.15) {
                    *b ^= 1;
                }
            }
            let res = regenerate_with(
                &noisy,
                &record,
                &bch,
                &polar,
                &RegenOptions::new(DecoderConfig::sc(), 0.15),
                Some(key.raw_bits()),
            )
            .unwrap();
            assert!(res.matches, "trial {trial}");
            assert_eq!(res.diagnostics.prehash_bit_errors, Some(0));
        }
    }

    #[test]
    fn garbage_response_fails_without_crashing() {
        let (bch, polar) = preset::codes();
        let mut rng = StreamRng::new(22);
        let bits = rng.next_bits(131);
        let (record, key) = register(&bits, &bch, &polar).unwrap();
        let garbage = rng.next_bits(131);
        let res = regenerate_with(
            &garbage,
            &record,
            &bch,
            &polar,
            &RegenOptions::new(DecoderConfig::sc(), 0.15),
            Some(key.raw_bits()),
        )
        .unwrap();
        assert!(!res.matches);
        assert_eq!(res.key_hash, [0u8; 32]);
        let f = res.diagnostics.flags;
        assert!(f.response_rejected || f.bch_decode_failed);
        // the key a random response yields is unrelated to the enrolled one
        let err = res.diagnostics.prehash_bit_errors.unwrap() as f64 / 250.0;
        assert!((0.3..=0.7).contains(&err), "key error {err}");
    }

    /// The public record determines the enrolled secret at the default
    /// sizes, so an ungated decode "corrects" arbitrarily distant inputs
    /// back to it; the consistency gate is what refuses them.
    #[test]
    fn gate_rejects_distant_inputs_that_would_otherwise_match() {
        let (bch, polar) = preset::codes();
        let mut rng = StreamRng::new(23);
        let bits = rng.next_bits(131);
        let (record, _) = register(&bits, &bch, &polar).unwrap();
        let mut far = bits.clone();
        for b in far.iter_mut().take(70) {
            *b ^= 1;
        }
        let mut opts = RegenOptions::new(DecoderConfig::sc(), 0.15);
        let gated = regenerate_with(&far, &record, &bch, &polar, &opts, None).unwrap();
        assert!(!gated.matches);
        assert!(gated.diagnostics.flags.response_rejected);
        opts.gate_fraction = 1.0;
        let ungated = regenerate_with(&far, &record, &bch, &polar, &opts, None).unwrap();
        assert!(ungated.matches, "ungated decode recovers the enrolled key from public data");
    }

    #[test]
    fn verify_distinguishes_hashes() {
        let (bch, polar) = toy_codes();
        let (record, key) = register(&[1, 1, 0, 0], &bch, &polar).unwrap();
        assert!(verify(key.hash(), &record));
        let mut wrong = *key.hash();
        wrong[0] ^= 0x01;
        assert!(!verify(&wrong, &record));
    }

    #[test]
    fn record_serialization_round_trips() {
        let (bch, polar) = preset::codes();
        let mut rng = StreamRng::new(23);
        let mask: Vec<u16> = (0..131).map(|i| i * 2).collect();
        let (record, _) = register_with_mask(&rng.next_bits(131), &mask, &bch, &polar).unwrap();
        let bytes = serialize_record(&record);
        let parsed = deserialize_record(&bytes).unwrap();
        assert_eq!(parsed, record);
    }

    #[test]
    fn corrupted_bytes_are_rejected() {
        let (bch, polar) = toy_codes();
        let (record, _) = register(&[0, 1, 0, 1], &bch, &polar).unwrap();
        let bytes = serialize_record(&record);
        for pos in [0usize, 5, bytes.len() / 2, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x40;
            assert!(deserialize_record(&bad).is_err(), "corruption at {pos} accepted");
        }
        assert!(deserialize_record(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn unknown_version_is_rejected() {
        let (bch, polar) = toy_codes();
        let (mut record, _) = register(&[0, 1, 0, 1], &bch, &polar).unwrap();
        record.version = 9;
        let bytes = serialize_record(&record);
        assert!(matches!(deserialize_record(&bytes), Err(ExtractorError::UnknownVersion(9))));
    }

    /// A record whose frozen-set checksum was tampered with (file CRC
    /// fixed up) must fail the integrity check at regeneration time.
    #[test]
    fn frozen_set_checksum_mismatch_is_an_integrity_error() {
        let (bch, polar) = toy_codes();
        let (mut record, _) = register(&[1, 0, 0, 1], &bch, &polar).unwrap();
        record.frozen_set_crc32 ^= 0xDEAD_BEEF;
        let err = regenerate_with(
            &[1, 0, 0, 1],
            &record,
            &bch,
            &polar,
            &RegenOptions::new(DecoderConfig::sc(), 0.0),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ExtractorError::Integrity(_)));
    }

    /// Exhaustive toy-instance independence: over all 2^4 inputs, every
    /// (helper bit, key bit) pair is jointly uniform unless one of the two
    /// is constant.
    #[test]
    fn toy_helper_key_pairs_are_jointly_uniform() {
        let (bch, polar) = toy_codes();
        let mut helpers = Vec::new();
        let mut keys = Vec::new();
        for v in 0u8..16 {
            let msg: Vec<u8> = (0..4).map(|i| (v >> i) & 1).collect();
            let (record, key) = register(&msg, &bch, &polar).unwrap();
            helpers.push(record.helper_bits.clone());
            keys.push(key.raw_bits().to_vec());
        }
        for hi in 0..5 {
            let hcol: Vec<u8> = helpers.iter().map(|h| h[hi]).collect();
            for ki in 0..3 {
                let kcol: Vec<u8> = keys.iter().map(|k| k[ki]).collect();
                let h_constant = hcol.iter().all(|&b| b == hcol[0]);
                let k_constant = kcol.iter().all(|&b| b == kcol[0]);
                if h_constant || k_constant {
                    continue;
                }
                let mut counts = [0usize; 4];
                for (h, k) in hcol.iter().zip(&kcol) {
                    counts[(h * 2 + k) as usize] += 1;
                }
                assert_eq!(counts, [4, 4, 4, 4], "helper {hi} / key {ki}: {counts:?}");
            }
        }
    }

    #[test]
    fn secret_key_debug_hides_bits() {
        let (bch, polar) = toy_codes();
        let (_, key) = register(&[1, 1, 1, 0], &bch, &polar).unwrap();
        let dbg = format!("{key:?}");
        assert!(!dbg.contains("raw"));
    }
}
