//! Bit-vector helpers.
//!
//! Bit vectors are `Vec<u8>` / `&[u8]` holding one bit per element (0 or 1).
//! Index 0 is the lowest polynomial degree wherever a vector is read as a
//! polynomial. Byte packing is MSB-first: bit index `j` lands in byte `j / 8`
//! at bit position `7 - j % 8`, and a partial final byte is zero-padded.

/// Pack bits MSB-first into bytes, zero-padding the final partial byte.
pub fn pack_msb_first(bits: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (j, &b) in bits.iter().enumerate() {
        debug_assert!(b <= 1, "bit vectors hold only 0/1 values");
        bytes[j / 8] |= (b & 1) << (7 - (j % 8));
    }
    bytes
}

/// Inverse of [`pack_msb_first`]; `bit_len` recovers the unpadded length.
pub fn unpack_msb_first(bytes: &[u8], bit_len: usize) -> Vec<u8> {
    assert!(bit_len <= bytes.len() * 8, "bit_len exceeds packed data");
    (0..bit_len)
        .map(|j| (bytes[j / 8] >> (7 - (j % 8))) & 1)
        .collect()
}

/// Number of positions where the two equal-length bit vectors differ.
pub fn hamming_distance(a: &[u8], b: &[u8]) -> usize {
    assert_eq!(a.len(), b.len(), "hamming distance needs equal lengths");
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// XOR `src` into `dst` element-wise.
pub fn xor_in_place(dst: &mut [u8], src: &[u8]) {
    assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}
