//! GF(2^m) arithmetic over log/antilog tables.
//!
//! Elements are `u16` values in `[0, 2^m)` read as polynomials over GF(2)
//! reduced modulo the field's primitive polynomial (bit `i` is the
//! coefficient of `x^i`). Addition is XOR; multiplication and inversion go
//! through discrete-log tables built at construction time.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GfError {
    #[error("field degree {0} out of supported range 3..=12")]
    DegreeOutOfRange(u32),
    #[error("polynomial {poly:#x} is not primitive of degree {m}")]
    NotPrimitive { m: u32, poly: u32 },
    #[error("no primitive polynomial of degree {0} found")]
    NoPrimitivePoly(u32),
}

/// A binary extension field GF(2^m), 3 <= m <= 12.
#[derive(Clone, Debug)]
pub struct GfField {
    m: u32,
    /// Multiplicative group order, 2^m - 1.
    n: usize,
    prim_poly: u32,
    /// exp[i] = alpha^i for i in [0, 2n) (doubled to skip a modulo).
    exp: Vec<u16>,
    /// log[v] = i with alpha^i = v, for v in [1, 2^m).
    log: Vec<u16>,
}

impl GfField {
    /// Build the field from an explicit primitive polynomial (bit m and bit 0
    /// must be set). Fails if the polynomial is not primitive: the table
    /// construction doubles as the primitivity check, since `x` generates
    /// the full multiplicative group iff its order is exactly 2^m - 1.
    pub fn new(m: u32, prim_poly: u32) -> Result<Self, GfError> {
        if !(3..=12).contains(&m) {
            return Err(GfError::DegreeOutOfRange(m));
        }
        let n = (1usize << m) - 1;
        if prim_poly >> m != 1 || prim_poly & 1 != 1 {
            return Err(GfError::NotPrimitive { m, poly: prim_poly });
        }
        let mut exp = vec![0u16; 2 * n];
        let mut log = vec![0u16; n + 1];
        let mut v: u32 = 1;
        for i in 0..n {
            if v == 1 && i > 0 {
                // returned to 1 early: order of x divides i < n
                return Err(GfError::NotPrimitive { m, poly: prim_poly });
            }
            exp[i] = v as u16;
            exp[i + n] = v as u16;
            log[v as usize] = i as u16;
            v <<= 1;
            if v >> m != 0 {
                v ^= prim_poly;
            }
        }
        if v != 1 {
            return Err(GfError::NotPrimitive { m, poly: prim_poly });
        }
        Ok(Self { m, n, prim_poly, exp, log })
    }

    /// Build the field over the lexicographically smallest primitive
    /// polynomial of degree m (smallest when read as an integer with bit `i`
    /// = coefficient of `x^i`).
    pub fn with_smallest_primitive(m: u32) -> Result<Self, GfError> {
        Self::new(m, smallest_primitive_poly(m)?)
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    /// Multiplicative group order 2^m - 1.
    pub fn group_order(&self) -> usize {
        self.n
    }

    pub fn primitive_poly(&self) -> u32 {
        self.prim_poly
    }

    /// alpha^e for any non-negative exponent.
    #[inline]
    pub fn alpha_pow(&self, e: usize) -> u16 {
        self.exp[e % self.n]
    }

    #[inline]
    pub fn log(&self, a: u16) -> usize {
        debug_assert!(a != 0, "log of zero is undefined");
        self.log[a as usize] as usize
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    /// Multiplicative inverse of a nonzero element.
    #[inline]
    pub fn inv(&self, a: u16) -> u16 {
        assert!(a != 0, "zero has no inverse");
        self.exp[self.n - self.log[a as usize] as usize]
    }
}

/// Lexicographically smallest primitive polynomial of degree m, found by
/// scanning candidates in integer order and testing the order of `x`.
pub fn smallest_primitive_poly(m: u32) -> Result<u32, GfError> {
    if !(3..=12).contains(&m) {
        return Err(GfError::DegreeOutOfRange(m));
    }
    let lo = 1u32 << m;
    let hi = 1u32 << (m + 1);
    for cand in (lo + 1..hi).step_by(2) {
        if GfField::new(m, cand).is_ok() {
            return Ok(cand);
        }
    }
    Err(GfError::NoPrimitivePoly(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_primitive_polys_match_known_tables() {
        // x^3+x+1, x^4+x+1, x^8+x^4+x^3+x^2+1
        assert_eq!(smallest_primitive_poly(3).unwrap(), 0x0B);
        assert_eq!(smallest_primitive_poly(4).unwrap(), 0x13);
        assert_eq!(smallest_primitive_poly(8).unwrap(), 0x11D);
    }

    #[test]
    fn rejects_non_primitive() {
        // x^8+x^4+x^3+x+1 (0x11B) is irreducible but not primitive
        assert!(GfField::new(8, 0x11B).is_err());
        // x^4+1 is reducible
        assert!(GfField::new(4, 0x11).is_err());
    }

    #[test]
    fn every_nonzero_element_has_an_inverse() {
        for m in [4u32, 8] {
            let f = GfField::with_smallest_primitive(m).unwrap();
            for a in 1..=f.group_order() as u16 {
                assert_eq!(f.mul(a, f.inv(a)), 1, "m={m} a={a}");
            }
        }
    }

    #[test]
    fn multiplication_is_associative_and_distributes() {
        let f = GfField::with_smallest_primitive(8).unwrap();
        let vals = [1u16, 2, 3, 87, 131, 200, 255];
        for &a in &vals {
            for &b in &vals {
                for &c in &vals {
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
                }
            }
        }
    }

    #[test]
    fn alpha_generates_the_group() {
        let f = GfField::with_smallest_primitive(4).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in 0..f.group_order() {
            seen.insert(f.alpha_pow(e));
        }
        assert_eq!(seen.len(), 15);
    }
}
