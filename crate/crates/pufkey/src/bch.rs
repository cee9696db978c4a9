//! Binary BCH codes: generator construction, systematic encoding, and
//! hard-decision decoding via syndromes, Berlekamp-Massey, and Chien search.
//!
//! Codeword layout is systematic with the message in positions `[0, k)` and
//! parity in `[k, n)`. With bit `i` read as the coefficient of `x^i`, the
//! parity polynomial is `p(x) = m(x) * x^(n-k) mod g(x)`; since `g` divides
//! `x^n + 1`, the assembled word `m(x) + x^k * p(x)` is divisible by `g`.

use crate::gf::{GfError, GfField};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BchError {
    #[error(transparent)]
    Field(#[from] GfError),
    #[error("t_target must be at least 1")]
    InvalidT,
    #[error("t_target {t_target} needs 2t designed roots but length {n} supports at most {max}")]
    CorrectionTooLarge { t_target: u32, n: usize, max: usize },
    #[error("no message bits left: generator degree {degree} reaches code length {n}")]
    EmptyMessageSpace { degree: usize, n: usize },
    #[error("input has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("uncorrectable word: error locator is inconsistent")]
    DecodeFailure,
}

/// Successful decode: recovered message and number of corrected positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub message: Vec<u8>,
    pub corrections: usize,
}

/// An (n, k) binary BCH code over GF(2^m) correcting up to `t` errors.
#[derive(Clone, Debug)]
pub struct BchCode {
    field: GfField,
    n: usize,
    k: usize,
    t: usize,
    /// Generator polynomial bits, index = degree; length n - k + 1.
    generator: Vec<u8>,
}

impl BchCode {
    /// Construct the narrow-sense BCH code of designed correction capability
    /// at least `t_target` over the lexicographically smallest primitive
    /// polynomial of degree `m`.
    pub fn new(m: u32, t_target: u32) -> Result<Self, BchError> {
        let field = GfField::with_smallest_primitive(m)?;
        Self::from_field(field, t_target)
    }

    /// Same construction over an explicitly chosen primitive polynomial.
    pub fn with_primitive_poly(m: u32, t_target: u32, prim_poly: u32) -> Result<Self, BchError> {
        let field = GfField::new(m, prim_poly)?;
        Self::from_field(field, t_target)
    }

    fn from_field(field: GfField, t_target: u32) -> Result<Self, BchError> {
        if t_target < 1 {
            return Err(BchError::InvalidT);
        }
        let n = field.group_order();
        if 2 * t_target as usize > n - 1 {
            return Err(BchError::CorrectionTooLarge { t_target, n, max: (n - 1) / 2 });
        }
        // Generator = lcm of the minimal polynomials of alpha^1 .. alpha^2t.
        // Each distinct cyclotomic coset contributes its minimal polynomial
        // exactly once.
        let mut covered = vec![false; n];
        let mut generator = vec![1u8];
        for i in 1..=2 * t_target as usize {
            if covered[i] {
                continue;
            }
            let mut coset = Vec::new();
            let mut e = i;
            loop {
                coset.push(e);
                covered[e] = true;
                e = (e * 2) % n;
                if e == i {
                    break;
                }
            }
            let min_poly = minimal_poly_bits(&field, &coset);
            generator = poly_mul_gf2(&generator, &min_poly);
        }
        let degree = generator.len() - 1;
        if degree >= n {
            return Err(BchError::EmptyMessageSpace { degree, n });
        }
        let k = n - degree;
        // Actual capability: longest run alpha^1..alpha^2t of generator
        // roots. At least t_target by construction.
        let mut run = 0;
        while run + 1 < n && covered[run + 1] {
            run += 1;
        }
        let t = run / 2;
        debug_assert!(t >= t_target as usize);
        Ok(Self { field, n, k, t, generator })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn field_degree(&self) -> u32 {
        self.field.degree()
    }

    pub fn primitive_poly(&self) -> u32 {
        self.field.primitive_poly()
    }

    /// Generator polynomial bits, index = degree.
    pub fn generator(&self) -> &[u8] {
        &self.generator
    }

    /// Systematically encode a k-bit message into an n-bit codeword.
    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>, BchError> {
        if msg.len() != self.k {
            return Err(BchError::LengthMismatch { got: msg.len(), expected: self.k });
        }
        let parity_len = self.n - self.k;
        // Remainder of m(x) * x^(n-k) divided by g(x).
        let mut work = vec![0u8; self.n];
        work[parity_len..].copy_from_slice(msg);
        for top in (parity_len..self.n).rev() {
            if work[top] == 1 {
                let base = top - parity_len;
                for (j, &g) in self.generator.iter().enumerate() {
                    work[base + j] ^= g;
                }
            }
        }
        let mut codeword = Vec::with_capacity(self.n);
        codeword.extend_from_slice(msg);
        codeword.extend_from_slice(&work[..parity_len]);
        Ok(codeword)
    }

    /// Decode an n-bit word, correcting up to `t` errors. Fails rather than
    /// silently accepting when the error locator is inconsistent or the
    /// corrected word is not a codeword.
    pub fn decode(&self, word: &[u8]) -> Result<Decoded, BchError> {
        if word.len() != self.n {
            return Err(BchError::LengthMismatch { got: word.len(), expected: self.n });
        }
        let syndromes = self.syndromes(word);
        if syndromes.iter().all(|&s| s == 0) {
            return Ok(Decoded { message: word[..self.k].to_vec(), corrections: 0 });
        }
        let locator = self.berlekamp_massey(&syndromes);
        let degree = poly_degree(&locator);
        if degree > self.t {
            return Err(BchError::DecodeFailure);
        }
        let error_positions = self.chien_search(&locator, degree);
        if error_positions.len() != degree {
            return Err(BchError::DecodeFailure);
        }
        let mut corrected = word.to_vec();
        for &pos in &error_positions {
            corrected[pos] ^= 1;
        }
        // A locator can look consistent on a word that is more than t errors
        // from every codeword; re-checking the syndromes rules that out.
        if self.syndromes(&corrected).iter().any(|&s| s != 0) {
            return Err(BchError::DecodeFailure);
        }
        Ok(Decoded { message: corrected[..self.k].to_vec(), corrections: degree })
    }

    /// S_i = r(alpha^i) for i = 1..=2t.
    fn syndromes(&self, word: &[u8]) -> Vec<u16> {
        let f = &self.field;
        (1..=2 * self.t)
            .map(|i| {
                let mut acc = 0u16;
                for (j, &bit) in word.iter().enumerate() {
                    if bit == 1 {
                        acc ^= f.alpha_pow(i * j);
                    }
                }
                acc
            })
            .collect()
    }

    /// Minimal-length LFSR (error locator polynomial) generating the
    /// syndrome sequence.
    fn berlekamp_massey(&self, syndromes: &[u16]) -> Vec<u16> {
        let f = &self.field;
        let len = syndromes.len();
        let mut sigma = vec![0u16; len + 1];
        let mut prev = vec![0u16; len + 1];
        sigma[0] = 1;
        prev[0] = 1;
        let mut l = 0usize;
        let mut shift = 1usize;
        let mut prev_discrepancy = 1u16;
        for step in 0..len {
            let mut d = syndromes[step];
            for i in 1..=l {
                if sigma[i] != 0 && step >= i {
                    d ^= f.mul(sigma[i], syndromes[step - i]);
                }
            }
            if d == 0 {
                shift += 1;
                continue;
            }
            let coef = f.mul(d, f.inv(prev_discrepancy));
            if 2 * l <= step {
                let snapshot = sigma.clone();
                for i in 0..=len {
                    if prev[i] != 0 && i + shift <= len {
                        sigma[i + shift] ^= f.mul(coef, prev[i]);
                    }
                }
                l = step + 1 - l;
                prev = snapshot;
                prev_discrepancy = d;
                shift = 1;
            } else {
                for i in 0..=len {
                    if prev[i] != 0 && i + shift <= len {
                        sigma[i + shift] ^= f.mul(coef, prev[i]);
                    }
                }
                shift += 1;
            }
        }
        sigma
    }

    /// Positions j where the locator vanishes at alpha^{-j}.
    fn chien_search(&self, locator: &[u16], degree: usize) -> Vec<usize> {
        let f = &self.field;
        let n = self.n;
        let mut positions = Vec::new();
        for j in 0..n {
            let inv_exp = n - (j % n);
            let mut acc = 0u16;
            for (d, &c) in locator.iter().take(degree + 1).enumerate() {
                if c != 0 {
                    acc ^= f.mul(c, f.alpha_pow(inv_exp * d % n));
                }
            }
            if acc == 0 {
                positions.push(j);
                if positions.len() > degree {
                    break;
                }
            }
        }
        positions
    }
}

/// Minimal polynomial of alpha^i as GF(2) bits: product of (X + alpha^e)
/// over the cyclotomic coset of i. All coefficients land in the prime field.
fn minimal_poly_bits(field: &GfField, coset: &[usize]) -> Vec<u8> {
    let mut poly: Vec<u16> = vec![1];
    for &e in coset {
        let a = field.alpha_pow(e);
        let mut next = vec![0u16; poly.len() + 1];
        for (d, &c) in poly.iter().enumerate() {
            if c != 0 {
                next[d + 1] ^= c;
                next[d] ^= field.mul(c, a);
            }
        }
        poly = next;
    }
    poly.iter()
        .map(|&c| {
            debug_assert!(c <= 1, "minimal polynomial must have binary coefficients");
            c as u8
        })
        .collect()
}

fn poly_mul_gf2(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 1 {
            for (j, &bj) in b.iter().enumerate() {
                out[i + j] ^= bj;
            }
        }
    }
    out
}

fn poly_degree(p: &[u16]) -> usize {
    p.iter().rposition(|&c| c != 0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    /// Independent brute-force oracle: minimal polynomial of alpha^i by root
    /// collection, using raw shift-xor polynomial arithmetic rather than the
    /// crate's log/exp tables.
    mod oracle {
        pub fn poly_mul_mod(a: u32, b: u32, prim: u32, m: u32) -> u32 {
            let mut acc = 0u32;
            let mut aa = a;
            let mut bb = b;
            while bb != 0 {
                if bb & 1 != 0 {
                    acc ^= aa;
                }
                bb >>= 1;
                aa <<= 1;
                if aa >> m != 0 {
                    aa ^= prim;
                }
            }
            acc
        }

        /// Generator of the (2^m - 1, k) BCH code with designed roots
        /// alpha^1..alpha^2t, built by multiplying linear factors over the
        /// extension field and keeping track of GF(2)-ness.
        pub fn generator_bits(m: u32, t: usize, prim: u32) -> Vec<u8> {
            let n = (1usize << m) - 1;
            // roots exponents needed: union of cyclotomic cosets of 1..2t
            let mut root_exps = std::collections::BTreeSet::new();
            for i in 1..=2 * t {
                let mut e = i;
                while !root_exps.contains(&e) {
                    root_exps.insert(e);
                    e = (e * 2) % n;
                }
            }
            // product of (X + alpha^e): coefficients are field elements
            let mut poly: Vec<u32> = vec![1];
            for &e in &root_exps {
                // alpha^e by repeated squaring-free walk
                let mut a = 1u32;
                for _ in 0..e {
                    a = poly_mul_mod(a, 2, prim, m);
                }
                let mut next = vec![0u32; poly.len() + 1];
                for (d, &c) in poly.iter().enumerate() {
                    next[d + 1] ^= c;
                    next[d] ^= poly_mul_mod(c, a, prim, m);
                }
                poly = next;
            }
            poly.iter()
                .map(|&c| {
                    assert!(c <= 1, "oracle generator coefficient not binary");
                    c as u8
                })
                .collect()
        }

        /// Remainder of word(x) / g(x) over GF(2); zero iff divisible.
        pub fn poly_rem_gf2(word: &[u8], g: &[u8]) -> Vec<u8> {
            let mut r = word.to_vec();
            let dg = g.len() - 1;
            for top in (dg..r.len()).rev() {
                if r[top] == 1 {
                    for (j, &gj) in g.iter().enumerate() {
                        r[top - dg + j] ^= gj;
                    }
                }
            }
            r.truncate(dg.min(r.len()));
            r
        }
    }

    #[test]
    fn small_code_parameters_match_oracle() {
        // (15, 7) t=2: generator degree 8, x^8+x^7+x^6+x^4+1
        let code = BchCode::new(4, 2).unwrap();
        assert_eq!((code.n(), code.k(), code.t()), (15, 7, 2));
        let expected = oracle::generator_bits(4, 2, code.primitive_poly());
        assert_eq!(code.generator(), &expected[..]);
        assert_eq!(code.generator(), &[1, 0, 0, 0, 1, 0, 1, 1, 1]);
    }

    #[test]
    fn hamming_code_generator_is_the_primitive_poly() {
        let code = BchCode::new(3, 1).unwrap();
        assert_eq!((code.n(), code.k(), code.t()), (7, 4, 1));
        assert_eq!(code.generator(), &[1, 1, 0, 1]); // x^3+x+1
    }

    #[test]
    fn production_code_is_255_131() {
        let code = BchCode::new(8, 18).unwrap();
        assert_eq!((code.n(), code.k(), code.t()), (255, 131, 18));
        assert_eq!(code.primitive_poly(), 0x11D);
        assert_eq!(code.generator().len() - 1, 124);
    }

    #[test]
    fn generator_divides_x_n_plus_1() {
        for (m, t) in [(3u32, 1u32), (4, 2), (8, 18)] {
            let code = BchCode::new(m, t).unwrap();
            let mut xn1 = vec![0u8; code.n() + 1];
            xn1[0] = 1;
            xn1[code.n()] = 1;
            let rem = oracle::poly_rem_gf2(&xn1, code.generator());
            assert!(rem.iter().all(|&b| b == 0), "m={m} t={t}");
        }
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(BchCode::new(3, 0).is_err());
        // 2t designed roots cannot exceed the nonzero field elements
        assert!(matches!(BchCode::new(3, 4), Err(BchError::CorrectionTooLarge { .. })));
        // t = 3 still fits: the (7, 1) repetition-grade code
        let code = BchCode::new(3, 3).unwrap();
        assert_eq!((code.n(), code.k(), code.t()), (7, 1, 3));
    }

    #[test]
    fn zero_message_encodes_to_zero() {
        let code = BchCode::new(4, 2).unwrap();
        assert_eq!(code.encode(&vec![0; 7]).unwrap(), vec![0; 15]);
    }

    #[test]
    fn codewords_are_divisible_by_generator() {
        let code = BchCode::new(4, 2).unwrap();
        let mut rng = StreamRng::new(11);
        for _ in 0..64 {
            let msg = rng.next_bits(7);
            let cw = code.encode(&msg).unwrap();
            assert_eq!(&cw[..7], &msg[..]);
            let rem = oracle::poly_rem_gf2(&cw, code.generator());
            assert!(rem.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn paper_scale_sizes() {
        let code = BchCode::new(8, 18).unwrap();
        let msg = vec![1u8; 131];
        assert_eq!(code.encode(&msg).unwrap().len(), 255);
        assert!(code.encode(&vec![0u8; 130]).is_err());
    }

    #[test]
    fn encoding_is_linear() {
        let code = BchCode::new(8, 18).unwrap();
        let mut rng = StreamRng::new(5);
        for _ in 0..16 {
            let a = rng.next_bits(131);
            let b = rng.next_bits(131);
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ca = code.encode(&a).unwrap();
            let cb = code.encode(&b).unwrap();
            let cs = code.encode(&sum).unwrap();
            let xored: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            assert_eq!(cs, xored);
        }
    }

    #[test]
    fn clean_round_trip() {
        let code = BchCode::new(4, 2).unwrap();
        let mut rng = StreamRng::new(2);
        for _ in 0..32 {
            let msg = rng.next_bits(7);
            let dec = code.decode(&code.encode(&msg).unwrap()).unwrap();
            assert_eq!(dec.message, msg);
            assert_eq!(dec.corrections, 0);
        }
    }

    #[test]
    fn corrects_all_patterns_up_to_t_exhaustively_7_4() {
        let code = BchCode::new(3, 1).unwrap();
        for m in 0u8..16 {
            let msg: Vec<u8> = (0..4).map(|i| (m >> i) & 1).collect();
            let cw = code.encode(&msg).unwrap();
            for flip in 0..=7usize {
                let mut noisy = cw.clone();
                let weight = if flip < 7 {
                    noisy[flip] ^= 1;
                    1
                } else {
                    0
                };
                let dec = code.decode(&noisy).unwrap();
                assert_eq!(dec.message, msg);
                assert_eq!(dec.corrections, weight);
            }
        }
    }

    #[test]
    fn corrects_all_patterns_up_to_t_exhaustively_15_7() {
        let code = BchCode::new(4, 2).unwrap();
        for m in 0u8..128 {
            let msg: Vec<u8> = (0..7).map(|i| (m >> i) & 1).collect();
            let cw = code.encode(&msg).unwrap();
            // weight 0, 1 and 2 error patterns
            let mut patterns: Vec<Vec<usize>> = vec![vec![]];
            patterns.extend((0..15).map(|i| vec![i]));
            for i in 0..15 {
                for j in i + 1..15 {
                    patterns.push(vec![i, j]);
                }
            }
            for pat in &patterns {
                let mut noisy = cw.clone();
                for &p in pat {
                    noisy[p] ^= 1;
                }
                let dec = code.decode(&noisy).unwrap();
                assert_eq!(dec.message, msg, "pattern {pat:?}");
                assert_eq!(dec.corrections, pat.len());
            }
        }
    }

    /// Exhaustive nearest-codeword oracle on (15, 7): decoding t random
    /// flips must agree with unique minimum-distance decoding.
    #[test]
    fn random_t_flip_trials_match_nearest_codeword_oracle_15_7() {
        let code = BchCode::new(4, 2).unwrap();
        let all_codewords: Vec<Vec<u8>> = (0u8..128)
            .map(|m| {
                let msg: Vec<u8> = (0..7).map(|i| (m >> i) & 1).collect();
                code.encode(&msg).unwrap()
            })
            .collect();
        let mut rng = StreamRng::new(77);
        for _ in 0..1000 {
            let msg = rng.next_bits(7);
            let cw = code.encode(&msg).unwrap();
            let mut noisy = cw.clone();
            let i = rng.next_below(15) as usize;
            let j = loop {
                let j = rng.next_below(15) as usize;
                if j != i {
                    break j;
                }
            };
            noisy[i] ^= 1;
            noisy[j] ^= 1;
            // oracle: the planted codeword must be the unique one within
            // distance t
            let within: Vec<&Vec<u8>> = all_codewords
                .iter()
                .filter(|c| crate::bits::hamming_distance(c, &noisy) <= 2)
                .collect();
            assert_eq!(within.len(), 1);
            assert_eq!(within[0], &cw);
            let dec = code.decode(&noisy).unwrap();
            assert_eq!(dec.message, msg);
            assert_eq!(dec.corrections, 2);
        }
    }

    #[test]
    fn random_t_flip_trials_255_131() {
        let code = BchCode::new(8, 18).unwrap();
        let mut rng = StreamRng::new(13);
        for trial in 0..300 {
            let msg = rng.next_bits(131);
            let cw = code.encode(&msg).unwrap();
            let mut noisy = cw.clone();
            let weight = 1 + rng.next_below(18) as usize;
            let mut flipped = std::collections::HashSet::new();
            while flipped.len() < weight {
                flipped.insert(rng.next_below(255) as usize);
            }
            for &p in &flipped {
                noisy[p] ^= 1;
            }
            let dec = code.decode(&noisy).unwrap();
            assert_eq!(dec.message, msg, "trial {trial}");
            assert_eq!(dec.corrections, weight);
        }
    }

    /// Beyond-capability words must never be silently accepted: the decoder
    /// either fails or returns a message whose codeword is within t of the
    /// input.
    #[test]
    fn nineteen_flips_never_silently_accepted() {
        let code = BchCode::new(8, 18).unwrap();
        let mut rng = StreamRng::new(99);
        for _ in 0..200 {
            let msg = rng.next_bits(131);
            let cw = code.encode(&msg).unwrap();
            let mut noisy = cw.clone();
            let mut flipped = std::collections::HashSet::new();
            while flipped.len() < 19 {
                flipped.insert(rng.next_below(255) as usize);
            }
            for &p in &flipped {
                noisy[p] ^= 1;
            }
            match code.decode(&noisy) {
                Err(BchError::DecodeFailure) => {}
                Err(e) => panic!("unexpected error {e}"),
                Ok(dec) => {
                    let recoded = code.encode(&dec.message).unwrap();
                    let dist = crate::bits::hamming_distance(&recoded, &noisy);
                    assert!(dist <= code.t(), "accepted word at distance {dist}");
                }
            }
        }
    }
}
